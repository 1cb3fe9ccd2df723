"""Training hyperparameters."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

# Identifier that builds a small randomly initialized encoder instead of
# loading pretrained weights. Keeps training runnable with no model hub.
SCRATCH_BASE = "scratch"

DEFAULT_BASE_MODEL = "distilbert-base-multilingual-cased"


@dataclass
class TrainConfig:
    """Knobs for one fine-tuning run; defaults are the deployed settings."""

    base_model: str = DEFAULT_BASE_MODEL
    max_seq_len: int = 128
    learning_rate: float = 1e-5
    weight_decay: float = 0.01
    batch_size: int = 16
    epochs: int = 3
    seed: int = 0
    # architecture of the scratch encoder; ignored for pretrained bases
    scratch_vocab_size: int = 2000
    scratch_hidden_size: int = 64
    scratch_layers: int = 2
    scratch_heads: int = 4

    def __post_init__(self) -> None:
        if not self.base_model:
            raise ValueError("base_model must be a non-empty identifier")
        for name in ("max_seq_len", "batch_size", "epochs",
                     "scratch_vocab_size", "scratch_hidden_size",
                     "scratch_layers", "scratch_heads"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.max_seq_len < 4:
            raise ValueError(f"max_seq_len must be at least 4, got {self.max_seq_len}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be non-negative, got {self.weight_decay}")
        if self.scratch_hidden_size % self.scratch_heads:
            raise ValueError("scratch_hidden_size must be divisible by scratch_heads")

    @property
    def is_scratch(self) -> bool:
        return self.base_model == SCRATCH_BASE

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**payload)

    @classmethod
    def from_json(cls, path: str | Path) -> "TrainConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(asdict(self), indent=2) + "\n", encoding="utf-8"
        )
