"""Record validation, feature extraction, and tokenizer training."""

from __future__ import annotations

from collections import Counter
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from refneed import SentenceRecord, read_jsonl
from refneed.classifier import SentenceFeatures
from refneed.errors import SchemaError

from .errors import DataSchemaError


def as_records(rows: Iterable) -> list[SentenceRecord]:
    """Normalize dicts or records into validated SentenceRecord objects."""
    records = []
    for i, row in enumerate(rows):
        if isinstance(row, SentenceRecord):
            record = row
        else:
            try:
                record = SentenceRecord.from_dict(row)
            except SchemaError as exc:
                raise DataSchemaError(f"record {i}: {exc}") from exc
        records.append(record)
    return records


def load_split(path: str | Path) -> list[SentenceRecord]:
    path = Path(path)
    if not path.is_file():
        raise DataSchemaError(f"no such data file: {path}")
    try:
        return as_records(read_jsonl(path))
    except SchemaError as exc:
        raise DataSchemaError(f"{path}: {exc}") from exc


def features_and_labels(
    records: Sequence[SentenceRecord],
) -> tuple[list[SentenceFeatures], np.ndarray]:
    features = [SentenceFeatures.from_record(r) for r in records]
    labels = np.array([r.label for r in records], dtype=np.int64)
    return features, labels


def train_wordpiece(records: Sequence[SentenceRecord], vocab_size: int) -> str:
    """Build a WordPiece tokenizer from the corpus text; returns serialized JSON.

    Vocabulary selection happens here rather than in the library trainer: the
    trainer breaks frequency ties in hash order, so identical inputs can yield
    different vocabularies and fine-tuning would not reproduce across runs.
    The vocabulary is the full character alphabet (with continuation pieces)
    plus whole words ranked by frequency. Special tokens are pinned so [PAD]
    always gets id 0, matching the encoder's padding and the serving backend.
    """
    from tokenizers import Tokenizer, models, normalizers, pre_tokenizers

    normalizer = normalizers.NFKC()
    pre_tokenizer = pre_tokenizers.Whitespace()

    word_counts: Counter[str] = Counter()
    for record in records:
        f = SentenceFeatures.from_record(record)
        for text in (f.lang, f.section_title, f.sentence, f.next_sent, f.prev_sent):
            for word, _span in pre_tokenizer.pre_tokenize_str(
                normalizer.normalize_str(text)
            ):
                word_counts[word] += 1

    vocab: dict[str, int] = {}

    def add(token: str) -> None:
        if token not in vocab and len(vocab) < vocab_size:
            vocab[token] = len(vocab)

    for special in ("[PAD]", "[UNK]", "[CLS]", "[SEP]"):
        add(special)
    for char in sorted({c for word in word_counts for c in word}):
        add(char)
        add("##" + char)
    for word, _count in sorted(word_counts.items(), key=lambda kv: (-kv[1], kv[0])):
        if len(word) > 1:
            add(word)

    tok = Tokenizer(models.WordPiece(vocab=vocab, unk_token="[UNK]"))
    tok.normalizer = normalizer
    tok.pre_tokenizer = pre_tokenizer
    return tok.to_str()


def batch_indices(
    n: int, batch_size: int, rng: np.random.Generator | None = None
) -> list[np.ndarray]:
    """Index batches over n items, shuffled when an rng is given."""
    order = np.arange(n)
    if rng is not None:
        rng.shuffle(order)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]
