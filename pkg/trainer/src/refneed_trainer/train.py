"""Fine-tuning loop and checkpoint persistence."""

from __future__ import annotations

import copy
import json
import logging
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from refneed import auc_roc, encode_batch
from refneed.classifier import SentenceFeatures, SubwordTokenizer

from .config import TrainConfig
from .data import as_records, batch_indices, features_and_labels
from .errors import CheckpointError, DataSchemaError
from .model import resolve_base

logger = logging.getLogger(__name__)

QUANTIZED_WEIGHTS = "quantized_weights.pt"


@dataclass
class TrainedClassifier:
    """A trained model with everything needed to serve or export it."""

    model: object
    tokenizer_json: str
    config: TrainConfig
    history: list[dict] = field(default_factory=list)

    def tokenizer(self) -> SubwordTokenizer:
        with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as handle:
            handle.write(self.tokenizer_json)
            path = Path(handle.name)
        try:
            return SubwordTokenizer(path)
        finally:
            path.unlink()


def _encode(
    features: Sequence[SentenceFeatures],
    tokenizer: SubwordTokenizer,
    max_seq_len: int,
):
    import torch

    ids, mask = encode_batch(features, tokenizer, max_seq_len=max_seq_len)
    return torch.from_numpy(ids), torch.from_numpy(mask)


def _valid_scores(model, features, tokenizer, config) -> np.ndarray:
    import torch

    scores = []
    model.eval()
    with torch.no_grad():
        for idx in batch_indices(len(features), config.batch_size):
            ids, mask = _encode([features[i] for i in idx], tokenizer, config.max_seq_len)
            logits = model(input_ids=ids, attention_mask=mask).logits
            scores.append(torch.softmax(logits, dim=1)[:, 1].numpy())
    return np.concatenate(scores)


def fine_tune(
    train_records: Sequence,
    valid_records: Sequence,
    config: TrainConfig | None = None,
) -> TrainedClassifier:
    """Train the two-class head, track validation AUC, keep the best epoch."""
    import torch

    config = config or TrainConfig()
    train = as_records(train_records)
    valid = as_records(valid_records)
    if not train:
        raise DataSchemaError("training split is empty")
    if len({r.label for r in valid}) != 2:
        raise DataSchemaError("validation split must contain both labels")

    model, tokenizer_json = resolve_base(config, train)
    trained = TrainedClassifier(model, tokenizer_json, config)
    tokenizer = trained.tokenizer()

    train_features, train_labels = features_and_labels(train)
    valid_features, valid_labels = features_and_labels(valid)

    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay
    )
    loss_fn = torch.nn.CrossEntropyLoss()

    best_auc = -1.0
    best_state = None
    for epoch in range(1, config.epochs + 1):
        model.train()
        losses = []
        for idx in batch_indices(len(train_features), config.batch_size, rng):
            ids, mask = _encode([train_features[i] for i in idx], tokenizer, config.max_seq_len)
            targets = torch.from_numpy(train_labels[idx])
            optimizer.zero_grad()
            logits = model(input_ids=ids, attention_mask=mask).logits
            loss = loss_fn(logits, targets)
            loss.backward()
            optimizer.step()
            losses.append(loss.detach().item())

        scores = _valid_scores(model, valid_features, tokenizer, config)
        valid_auc = auc_roc(valid_labels.tolist(), scores.tolist())
        entry = {
            "epoch": epoch,
            "train_loss": float(np.mean(losses)),
            "valid_auc": valid_auc,
        }
        trained.history.append(entry)
        logger.info(
            "epoch %d/%d train_loss %.4f valid_auc %.4f",
            epoch, config.epochs, entry["train_loss"], valid_auc,
        )
        if valid_auc > best_auc:
            best_auc = valid_auc
            best_state = copy.deepcopy(model.state_dict())

    model.load_state_dict(best_state)
    model.eval()
    return trained


def save_checkpoint(trained: TrainedClassifier, out_dir: str | Path) -> Path:
    """Write model weights, tokenizer, config, and history to a directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trained.model.save_pretrained(out)
    (out / "tokenizer.json").write_text(trained.tokenizer_json, encoding="utf-8")
    (out / "train_config.json").write_text(
        json.dumps(asdict(trained.config), indent=2) + "\n", encoding="utf-8"
    )
    (out / "history.json").write_text(
        json.dumps(trained.history, indent=2) + "\n", encoding="utf-8"
    )
    return out


@dataclass
class Checkpoint:
    model: object
    tokenizer_json: str
    config: TrainConfig
    history: list[dict]
    quantized: bool


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Rebuild a saved model; quantized weights are re-wrapped before loading."""
    import torch
    from transformers import AutoConfig, AutoModelForSequenceClassification

    root = Path(path)
    for name in ("config.json", "tokenizer.json", "train_config.json"):
        if not (root / name).is_file():
            raise CheckpointError(f"checkpoint {root} is missing {name}")

    config = TrainConfig.from_json(root / "train_config.json")
    history_file = root / "history.json"
    history = json.loads(history_file.read_text(encoding="utf-8")) if history_file.is_file() else []
    tokenizer_json = (root / "tokenizer.json").read_text(encoding="utf-8")

    quantized = (root / QUANTIZED_WEIGHTS).is_file()
    try:
        arch = AutoConfig.from_pretrained(root)
        # we compute the loss ourselves; an unset loss_type only triggers noise
        arch.loss_type = "ForSequenceClassification"
        if quantized:
            model = AutoModelForSequenceClassification.from_config(arch).eval()
            model = torch.ao.quantization.quantize_dynamic(
                model, {torch.nn.Linear}, dtype=torch.qint8
            )
            state = torch.load(root / QUANTIZED_WEIGHTS, weights_only=True)
            model.load_state_dict(state)
        else:
            model = AutoModelForSequenceClassification.from_pretrained(root, config=arch)
    except (OSError, ValueError, RuntimeError) as exc:
        raise CheckpointError(f"cannot load model from {root}: {exc}") from exc
    model.eval()
    return Checkpoint(model, tokenizer_json, config, history, quantized)
