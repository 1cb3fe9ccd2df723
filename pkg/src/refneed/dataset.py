"""Corpus records: schema, serialization, filtering, splitting, sampling.

A record is one sentence with its paragraph context and provenance. The
JSONL wire order is fixed so corpus files diff cleanly across builds.
Splits are assigned per page by seeded hash, never per sentence, so the
same page can never leak across train and test.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import InsufficientData, SchemaError
from .sentences import LabeledSentence, extract_sentences
from .wikitext import ParsedDocument

FIELD_ORDER = (
    "wiki_db",
    "page_id",
    "page_title",
    "revision_id",
    "section_name",
    "sentence",
    "next_sent",
    "prev_sent",
    "paragraph",
    "label",
)

MIN_WORDS = 6
# Scripts written without spaces are measured in characters instead.
MIN_UNSPACED_CHARS = 12

_INT_FIELDS = {"page_id", "revision_id", "label"}


@dataclass(frozen=True)
class SentenceRecord:
    wiki_db: str
    page_id: int
    page_title: str
    revision_id: int
    section_name: str
    sentence: str
    next_sent: str
    prev_sent: str
    paragraph: str
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise SchemaError(f"label must be 0 or 1, got {self.label!r}")

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in FIELD_ORDER}

    @classmethod
    def from_dict(cls, payload: dict) -> "SentenceRecord":
        if not isinstance(payload, dict):
            raise SchemaError(f"record must be an object, got {type(payload).__name__}")
        kwargs = {}
        for name in FIELD_ORDER:
            if name not in payload:
                raise SchemaError(f"missing field {name!r}")
            value = payload[name]
            if name in _INT_FIELDS:
                if isinstance(value, bool) or not isinstance(value, int):
                    raise SchemaError(f"field {name!r} must be an integer")
            elif not isinstance(value, str):
                raise SchemaError(f"field {name!r} must be a string")
            kwargs[name] = value
        return cls(**kwargs)


assert tuple(f.name for f in fields(SentenceRecord)) == FIELD_ORDER


def wiki_db_of(lang: str) -> str:
    return f"{lang}wiki"


def records_from_document(doc: ParsedDocument) -> list[SentenceRecord]:
    """Sentence records for one parsed revision, unfiltered."""
    meta = doc.meta
    db = wiki_db_of(meta.lang)
    out = []
    for item in extract_sentences(doc):
        out.append(
            SentenceRecord(
                wiki_db=db,
                page_id=meta.page_id,
                page_title=meta.page_title,
                revision_id=meta.rev_id,
                section_name=item.section_name,
                sentence=item.sentence,
                next_sent=item.next_sent,
                prev_sent=item.prev_sent,
                paragraph=item.paragraph,
                label=item.label,
            )
        )
    return out


# -- serialization -----------------------------------------------------------


def to_jsonl_line(record: SentenceRecord) -> str:
    return json.dumps(record.to_dict(), ensure_ascii=False, separators=(",", ":"))


def from_jsonl_line(line: str) -> SentenceRecord:
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    return SentenceRecord.from_dict(payload)


def write_jsonl(records: Iterable[SentenceRecord], path: str | Path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(to_jsonl_line(record))
            handle.write("\n")
            count += 1
    return count


def read_jsonl(path: str | Path) -> Iterator[SentenceRecord]:
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                yield from_jsonl_line(line)


# -- corpus filters ----------------------------------------------------------

_UNSPACED_RANGES = (
    (0x3040, 0x30FF),    # hiragana, katakana
    (0x3400, 0x4DBF),    # CJK extension A
    (0x4E00, 0x9FFF),    # CJK unified
    (0xF900, 0xFAFF),    # CJK compatibility
    (0xAC00, 0xD7AF),    # hangul syllables
)


def _unspaced_count(text: str) -> int:
    return sum(
        1 for ch in text if any(lo <= ord(ch) <= hi for lo, hi in _UNSPACED_RANGES)
    )


def long_enough(sentence: str) -> bool:
    """Whether a sentence clears the minimum-length floor."""
    if len(sentence.split()) >= MIN_WORDS:
        return True
    return _unspaced_count(sentence) >= MIN_UNSPACED_CHARS


def filter_records(records: Iterable[SentenceRecord]) -> list[SentenceRecord]:
    """Drop too-short sentences, then exact duplicates (first one wins)."""
    seen: set[str] = set()
    kept = []
    for record in records:
        if not long_enough(record.sentence):
            continue
        if record.sentence in seen:
            continue
        seen.add(record.sentence)
        kept.append(record)
    return kept


# -- splitting and sampling --------------------------------------------------


def _page_fraction(seed: int, wiki_db: str, page_id: int) -> float:
    digest = hashlib.blake2b(
        f"{seed}|{wiki_db}|{page_id}".encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big") / 2**64


def split_by_page(
    records: Sequence[SentenceRecord],
    fractions: Sequence[float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> tuple[list[SentenceRecord], ...]:
    """Partition records into page-disjoint splits of roughly given sizes."""
    if not fractions:
        raise ValueError("fractions must be non-empty")
    if any(f < 0 for f in fractions):
        raise ValueError("fractions must be non-negative")
    total = sum(fractions)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {total}")

    bounds = np.cumsum(fractions)
    splits: tuple[list[SentenceRecord], ...] = tuple([] for _ in fractions)
    for record in records:
        u = _page_fraction(seed, record.wiki_db, record.page_id)
        idx = int(np.searchsorted(bounds, u, side="right"))
        idx = min(idx, len(fractions) - 1)
        splits[idx].append(record)
    return splits


def balanced_sample(
    records: Sequence[SentenceRecord], per_language: int, seed: int = 0
) -> list[SentenceRecord]:
    """Exactly per_language records per wiki, half of each label.

    Selection is seeded and independent of input grouping: wikis are
    processed in sorted order and each draws from its own derived stream.
    Raises InsufficientData when a wiki lacks enough of either label.
    """
    if per_language <= 0 or per_language % 2:
        raise ValueError(f"per_language must be a positive even number, got {per_language}")
    half = per_language // 2

    def record_key(record: SentenceRecord):
        return tuple(getattr(record, name) for name in FIELD_ORDER)

    pools: dict[str, tuple[list[SentenceRecord], list[SentenceRecord]]] = {}
    for record in records:
        pos, neg = pools.setdefault(record.wiki_db, ([], []))
        (pos if record.label == 1 else neg).append(record)

    chosen: list[SentenceRecord] = []
    for wiki_db in sorted(pools):
        pos, neg = pools[wiki_db]
        for label, pool in ((1, pos), (0, neg)):
            if len(pool) < half:
                raise InsufficientData(wiki_db, label, half, len(pool))
        stream = np.random.default_rng(
            int.from_bytes(
                hashlib.blake2b(
                    f"{seed}|{wiki_db}".encode("utf-8"), digest_size=8
                ).digest(),
                "big",
            )
        )
        for pool in (pos, neg):
            pool = sorted(pool, key=record_key)
            picks = stream.choice(len(pool), size=half, replace=False)
            chosen.extend(pool[int(i)] for i in sorted(int(i) for i in picks))
    return chosen
