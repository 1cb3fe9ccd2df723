"""Base model construction: pretrained encoders or a small scratch one."""

from __future__ import annotations

from typing import Sequence

from refneed import SentenceRecord

from .config import TrainConfig
from .data import train_wordpiece
from .errors import BaseModelError


def build_scratch_model(config: TrainConfig, vocab_size: int):
    """Randomly initialized compact encoder with a two-class head."""
    import torch
    from transformers import DistilBertConfig, DistilBertForSequenceClassification

    torch.manual_seed(config.seed)
    arch = DistilBertConfig(
        vocab_size=vocab_size,
        dim=config.scratch_hidden_size,
        n_layers=config.scratch_layers,
        n_heads=config.scratch_heads,
        hidden_dim=4 * config.scratch_hidden_size,
        max_position_embeddings=max(config.max_seq_len, 128),
        num_labels=2,
        pad_token_id=0,
        loss_type="ForSequenceClassification",
    )
    return DistilBertForSequenceClassification(arch)


def build_pretrained_model(config: TrainConfig):
    """Pretrained encoder plus its tokenizer, both resolved by identifier.

    Returns (model, tokenizer_json). Any resolution failure (unknown name,
    no local copy, unreachable hub) surfaces as BaseModelError.
    """
    try:
        from transformers import AutoModelForSequenceClassification, AutoTokenizer
    except ImportError as exc:
        raise BaseModelError("the transformers package is required for pretrained bases") from exc

    try:
        model = AutoModelForSequenceClassification.from_pretrained(
            config.base_model, num_labels=2
        )
        hf_tokenizer = AutoTokenizer.from_pretrained(config.base_model)
    except Exception as exc:
        raise BaseModelError(f"cannot load base model {config.base_model!r}: {exc}") from exc

    backend = getattr(hf_tokenizer, "backend_tokenizer", None)
    if backend is None:
        raise BaseModelError(
            f"base model {config.base_model!r} has no fast tokenizer to export"
        )
    return model, backend.to_str()


def resolve_base(config: TrainConfig, train_records: Sequence[SentenceRecord]):
    """Model and serialized tokenizer for the configured base."""
    if config.is_scratch:
        from tokenizers import Tokenizer

        tokenizer_json = train_wordpiece(train_records, config.scratch_vocab_size)
        vocab_size = Tokenizer.from_str(tokenizer_json).get_vocab_size()
        return build_scratch_model(config, vocab_size), tokenizer_json
    return build_pretrained_model(config)
