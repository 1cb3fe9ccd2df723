"""Dynamic quantization and serving-bundle export."""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

from refneed import CLASSES, FEATURE_TEMPLATE, encode_batch
from refneed.classifier import MODEL_FILE, SentenceFeatures, SubwordTokenizer

from .train import QUANTIZED_WEIGHTS, Checkpoint

TOKENIZER_FILE = "tokenizer.json"
META_FILE = "meta.json"


def quantize_dynamic(model):
    """Linear weights stored as int8, dequantized on the fly at inference."""
    import torch

    return torch.ao.quantization.quantize_dynamic(
        model, {torch.nn.Linear}, dtype=torch.qint8
    )


def save_quantized_checkpoint(checkpoint: Checkpoint, out_dir: str | Path) -> Path:
    """Persist a quantized model alongside the artifacts of its float parent."""
    import torch

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    checkpoint.model.config.save_pretrained(out)
    torch.save(checkpoint.model.state_dict(), out / QUANTIZED_WEIGHTS)
    (out / "tokenizer.json").write_text(checkpoint.tokenizer_json, encoding="utf-8")
    (out / "train_config.json").write_text(
        json.dumps(asdict(checkpoint.config), indent=2) + "\n", encoding="utf-8"
    )
    (out / "history.json").write_text(
        json.dumps(checkpoint.history, indent=2) + "\n", encoding="utf-8"
    )
    return out


def export_bundle(
    model,
    tokenizer_json: str,
    out_dir: str | Path,
    *,
    max_seq_len: int,
    model_version: int = 0,
) -> Path:
    """Trace the model and write the three-file directory the server loads."""
    import torch

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    vocab_size = int(model.config.vocab_size)
    torch.manual_seed(0)
    length = min(16, max_seq_len)
    ids = torch.randint(1, vocab_size, (2, length), dtype=torch.int64)
    mask = torch.ones(2, length, dtype=torch.int64)
    # one padded position so the traced graph exercises the masking path
    ids[1, -1] = 0
    mask[1, -1] = 0

    model.eval()
    # tracing probes every attribute of every submodule, which resolves the
    # lazy loss_function property on nested encoder modules; those lack a
    # loss_type and would log a spurious default-loss warning
    for module in model.modules():
        if hasattr(type(module), "loss_function") and getattr(module, "loss_type", None) is None:
            module.loss_type = "ForSequenceClassification"
    with warnings.catch_warnings():
        # the data-dependent branches the tracer flags are pinned by the
        # encoder contract (mask length equals ids length); check_trace and
        # the faithfulness tests compare the graph against eager outputs
        warnings.simplefilter("ignore", torch.jit.TracerWarning)
        traced = torch.jit.trace(model, (ids, mask), strict=False)
    traced.save(str(out / MODEL_FILE))

    (out / TOKENIZER_FILE).write_text(tokenizer_json, encoding="utf-8")
    meta = {
        "model_version": model_version,
        "max_seq_len": max_seq_len,
        "classes": list(CLASSES),
        "feature_template": FEATURE_TEMPLATE,
    }
    (out / META_FILE).write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return out


def prediction_agreement(
    model_a,
    model_b,
    features: Sequence[SentenceFeatures],
    tokenizer: SubwordTokenizer,
    max_seq_len: int,
    batch_size: int = 64,
) -> float:
    """Fraction of inputs where both models pick the same class."""
    import torch

    agree = 0
    with torch.no_grad():
        for start in range(0, len(features), batch_size):
            chunk = features[start : start + batch_size]
            ids, mask = encode_batch(chunk, tokenizer, max_seq_len=max_seq_len)
            ids_t = torch.from_numpy(ids)
            mask_t = torch.from_numpy(mask)
            pred_a = model_a(input_ids=ids_t, attention_mask=mask_t).logits.argmax(dim=1)
            pred_b = model_b(input_ids=ids_t, attention_mask=mask_t).logits.argmax(dim=1)
            agree += int((pred_a == pred_b).sum())
    return agree / len(features) if features else float("nan")
