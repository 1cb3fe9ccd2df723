"""Command line entry points: train, quantize, export."""

from __future__ import annotations

import argparse
import logging
import sys
import tempfile
import warnings
from pathlib import Path

from .config import TrainConfig
from .data import features_and_labels, load_split
from .errors import TrainerError
from .export import export_bundle, prediction_agreement, quantize_dynamic, save_quantized_checkpoint
from .train import Checkpoint, fine_tune, load_checkpoint, save_checkpoint

logger = logging.getLogger(__name__)


def _cmd_train(args) -> int:
    data_dir = Path(args.data)
    config = TrainConfig.from_json(args.config) if args.config else TrainConfig()
    if args.base_model:
        from dataclasses import asdict

        merged = asdict(config)
        merged["base_model"] = args.base_model
        config = TrainConfig.from_dict(merged)

    train_records = load_split(data_dir / "train.jsonl")
    valid_records = load_split(data_dir / "valid.jsonl")
    trained = fine_tune(train_records, valid_records, config)
    out = save_checkpoint(trained, args.out)
    best = max(e["valid_auc"] for e in trained.history)
    print(f"checkpoint written to {out} (best valid AUC {best:.4f})")
    return 0


def _cmd_quantize(args) -> int:
    checkpoint = load_checkpoint(getattr(args, "in"))
    if checkpoint.quantized:
        print("input checkpoint is already quantized", file=sys.stderr)
        return 1
    quantized = quantize_dynamic(checkpoint.model)
    out = save_quantized_checkpoint(
        Checkpoint(
            quantized,
            checkpoint.tokenizer_json,
            checkpoint.config,
            checkpoint.history,
            quantized=True,
        ),
        args.out,
    )
    print(f"quantized checkpoint written to {out}")

    if args.sample:
        records = load_split(args.sample)
        features, _ = features_and_labels(records)
        with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as handle:
            handle.write(checkpoint.tokenizer_json)
            tok_path = Path(handle.name)
        try:
            from refneed.classifier import SubwordTokenizer

            tokenizer = SubwordTokenizer(tok_path)
        finally:
            tok_path.unlink()
        agreement = prediction_agreement(
            checkpoint.model, quantized, features, tokenizer, checkpoint.config.max_seq_len
        )
        print(f"label agreement with float model on {len(features)} sentences: {agreement:.4f}")
        if agreement < 0.95:
            print("warning: agreement below 0.95", file=sys.stderr)
    return 0


def _cmd_export(args) -> int:
    checkpoint = load_checkpoint(getattr(args, "in"))
    out = export_bundle(
        checkpoint.model,
        checkpoint.tokenizer_json,
        args.out,
        max_seq_len=checkpoint.config.max_seq_len,
        model_version=args.model_version,
    )
    kind = "quantized" if checkpoint.quantized else "float"
    print(f"{kind} bundle written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refneed-trainer",
        description="Train, quantize, and export citation-need classifiers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="fine-tune on train.jsonl/valid.jsonl in a directory")
    train.add_argument("--data", required=True, help="directory with train.jsonl and valid.jsonl")
    train.add_argument("--config", help="JSON file overriding training defaults")
    train.add_argument("--base-model", help="base model identifier, or 'scratch'")
    train.add_argument("--out", required=True, help="checkpoint output directory")
    train.set_defaults(fn=_cmd_train)

    quantize = sub.add_parser("quantize", help="int8-quantize a float checkpoint")
    quantize.add_argument("--in", required=True, help="float checkpoint directory")
    quantize.add_argument("--out", required=True, help="quantized checkpoint directory")
    quantize.add_argument("--sample", help="JSONL of records for the agreement report")
    quantize.set_defaults(fn=_cmd_quantize)

    export = sub.add_parser("export", help="write the serving bundle for a checkpoint")
    export.add_argument("--in", required=True, help="checkpoint directory")
    export.add_argument("--out", required=True, help="bundle output directory")
    export.add_argument("--model-version", type=int, default=0)
    export.set_defaults(fn=_cmd_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        from transformers.utils import logging as hf_logging

        hf_logging.disable_progress_bar()
    except ImportError:
        pass
    # deprecation noise from torch internals on the quantized paths
    warnings.filterwarnings("ignore", message="TypedStorage is deprecated")
    warnings.filterwarnings("ignore", message="torch.quantize_per_tensor")
    warnings.filterwarnings("ignore", message="torch.ao.quantization is deprecated")
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except TrainerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
