"""Sentence scoring: feature encoding, tokenizers, model backends, bundles.

A sentence is scored from five fields: language code, section title, the
sentence, and its next and previous neighbors. The fields are tokenized
separately, joined by the separator token, truncated from the end to the
sequence budget, and wrapped in classifier and separator tokens. Class
order is fixed: index 0 is no-citation, index 1 is needs-citation.

Two interchangeable backends produce logits. The graph backend runs a
serialized TorchScript model and needs the optional torch dependency. The
hash backend derives a score from a seeded digest of the token ids; it is
deterministic, dependency-free, and exercises every code path around the
model without one.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np
from scipy.special import softmax
from sklearn.base import BaseEstimator

from .dataset import SentenceRecord
from .errors import BackendError, BundleValidationError, TokenizerError

CLASSES = ("no-citation", "needs-citation")
FEATURE_TEMPLATE = (
    "{lang} [SEP] {section_title} [SEP] {sentence} [SEP] {next_sent} [SEP] {prev_sent}"
)
DEFAULT_MAX_SEQ_LEN = 128

_FIELD_NAMES = ("lang", "section_title", "sentence", "next_sent", "prev_sent")
_PLACEHOLDER = re.compile(r"^\{([a-z_]+)\}$")


@dataclass(frozen=True)
class SentenceFeatures:
    lang: str
    section_title: str
    sentence: str
    next_sent: str
    prev_sent: str

    @classmethod
    def from_record(cls, record: SentenceRecord) -> "SentenceFeatures":
        lang = record.wiki_db[:-4] if record.wiki_db.endswith("wiki") else record.wiki_db
        return cls(
            lang=lang,
            section_title=record.section_name,
            sentence=record.sentence,
            next_sent=record.next_sent,
            prev_sent=record.prev_sent,
        )


def template_fields(template: str) -> tuple[str, ...]:
    """Field order encoded by a feature template.

    The template is a sequence of ``{field}`` placeholders joined by the
    literal separator token.
    """
    pieces = template.split(" [SEP] ")
    names = []
    for piece in pieces:
        m = _PLACEHOLDER.match(piece.strip())
        if not m or m.group(1) not in _FIELD_NAMES:
            raise BundleValidationError(
                "feature_template", f"unrecognized template piece {piece!r}"
            )
        names.append(m.group(1))
    if not names:
        raise BundleValidationError("feature_template", "template is empty")
    return tuple(names)


class Tokenizer(Protocol):
    cls_id: int
    sep_id: int
    pad_id: int

    def encode_text(self, text: str) -> list[int]: ...


class HashTokenizer:
    """Deterministic tokenizer for the hash backend: one id per hashed token."""

    def __init__(self, vocab_size: int = 8192):
        if vocab_size <= 8:
            raise ValueError("vocab_size too small")
        self.vocab_size = vocab_size
        self.pad_id = 0
        self.cls_id = 1
        self.sep_id = 2
        self._base = 3

    def encode_text(self, text: str) -> list[int]:
        span = self.vocab_size - self._base
        out = []
        for token in text.split():
            token = token.strip(string.punctuation).casefold() or token
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=4).digest()
            out.append(self._base + int.from_bytes(digest, "big") % span)
        return out


class SubwordTokenizer:
    """Trained subword vocabulary loaded from a tokenizer file."""

    def __init__(self, path: str | Path):
        try:
            from tokenizers import Tokenizer as _Tokenizer
        except ImportError as exc:  # pragma: no cover - hard dependency
            raise TokenizerError("the tokenizers package is not installed") from exc
        try:
            self._tok = _Tokenizer.from_file(str(path))
        except Exception as exc:
            raise TokenizerError(f"cannot load tokenizer from {path}: {exc}") from exc
        ids = {}
        for name in ("[PAD]", "[CLS]", "[SEP]"):
            token_id = self._tok.token_to_id(name)
            if token_id is None:
                raise TokenizerError(f"tokenizer lacks the {name} token")
            ids[name] = token_id
        self.pad_id = ids["[PAD]"]
        self.cls_id = ids["[CLS]"]
        self.sep_id = ids["[SEP]"]

    def encode_text(self, text: str) -> list[int]:
        return self._tok.encode(text, add_special_tokens=False).ids


def encode(
    features: SentenceFeatures,
    tokenizer: Tokenizer,
    max_seq_len: int = DEFAULT_MAX_SEQ_LEN,
    template: str = FEATURE_TEMPLATE,
) -> list[int]:
    """Token ids for one sentence, truncated from the end to max_seq_len."""
    if max_seq_len < 4:
        raise ValueError(f"max_seq_len must be at least 4, got {max_seq_len}")
    body: list[int] = []
    for idx, name in enumerate(template_fields(template)):
        if idx:
            body.append(tokenizer.sep_id)
        body.extend(tokenizer.encode_text(getattr(features, name)))
    body = body[: max_seq_len - 2]
    return [tokenizer.cls_id, *body, tokenizer.sep_id]


def encode_batch(
    batch: Sequence[SentenceFeatures],
    tokenizer: Tokenizer,
    max_seq_len: int = DEFAULT_MAX_SEQ_LEN,
    template: str = FEATURE_TEMPLATE,
) -> tuple[np.ndarray, np.ndarray]:
    """Padded id and mask matrices of shape (batch, longest sequence)."""
    rows = [encode(f, tokenizer, max_seq_len, template) for f in batch]
    width = max((len(r) for r in rows), default=2)
    ids = np.full((len(rows), width), tokenizer.pad_id, dtype=np.int64)
    mask = np.zeros((len(rows), width), dtype=np.int64)
    for i, row in enumerate(rows):
        ids[i, : len(row)] = row
        mask[i, : len(row)] = 1
    return ids, mask


class Backend(Protocol):
    def logits(self, ids: np.ndarray, mask: np.ndarray) -> np.ndarray: ...


class HashBackend:
    """Seeded pseudo-model: logits depend only on the unpadded token ids."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._prefix = str(int(seed)).encode("ascii") + b"|"

    def logits(self, ids: np.ndarray, mask: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        mask = np.asarray(mask, dtype=np.int64)
        out = np.zeros((ids.shape[0], 2), dtype=np.float64)
        for i in range(ids.shape[0]):
            row = ids[i, mask[i] == 1]
            digest = hashlib.blake2b(
                self._prefix + row.astype("<i8").tobytes(), digest_size=8
            ).digest()
            u = int.from_bytes(digest, "big") / 2**64
            u = min(max(u, 1e-12), 1 - 1e-12)
            out[i, 1] = math.log(u / (1.0 - u))
        return out


class TorchScriptBackend:
    """Serialized graph executed on CPU with a bounded thread pool."""

    def __init__(self, path: str | Path, threads: int | None = None):
        try:
            import torch
        except ImportError as exc:
            raise BackendError(
                "the torch package is required for the graph backend; "
                "install the model extra"
            ) from exc
        self._torch = torch
        if threads is not None:
            if threads <= 0:
                raise ValueError(f"threads must be positive, got {threads}")
            torch.set_num_threads(threads)
        try:
            self._model = torch.jit.load(str(path), map_location="cpu")
        except Exception as exc:
            raise BackendError(f"cannot load serialized model from {path}: {exc}") from exc
        self._model.eval()

    def logits(self, ids: np.ndarray, mask: np.ndarray) -> np.ndarray:
        torch = self._torch
        with torch.inference_mode():
            raw = self._model(
                torch.from_numpy(np.ascontiguousarray(ids, dtype=np.int64)),
                torch.from_numpy(np.ascontiguousarray(mask, dtype=np.int64)),
            )
        if isinstance(raw, dict):
            raw = raw["logits"]
        elif isinstance(raw, (tuple, list)):
            raw = raw[0]
        out = raw.detach().cpu().numpy()
        if out.ndim != 2 or out.shape[1] != len(CLASSES):
            raise BackendError(f"model produced logits of shape {out.shape}")
        return out.astype(np.float64)


class ReferenceNeedClassifier(BaseEstimator):
    """Scores sentences for citation need.

    Follows the estimator convention: construction stores parameters,
    ``fit`` is a no-op returning self (weights come from a bundle, not from
    this class), and predictions run through ``predict_proba`` / ``predict``.
    """

    def __init__(
        self,
        tokenizer: Tokenizer | None = None,
        backend: Backend | None = None,
        max_seq_len: int = DEFAULT_MAX_SEQ_LEN,
        template: str = FEATURE_TEMPLATE,
        batch_size: int = 32,
        model_version: int = 0,
    ):
        self.tokenizer = tokenizer
        self.backend = backend
        self.max_seq_len = max_seq_len
        self.template = template
        self.batch_size = batch_size
        self.model_version = model_version

    def _components(self) -> tuple[Tokenizer, Backend]:
        tokenizer = self.tokenizer if self.tokenizer is not None else HashTokenizer()
        backend = self.backend if self.backend is not None else HashBackend()
        return tokenizer, backend

    def fit(self, X=None, y=None) -> "ReferenceNeedClassifier":
        return self

    def predict_proba(self, X: Sequence[SentenceFeatures]) -> np.ndarray:
        """Class probabilities, shape (len(X), 2), rows summing to one."""
        if self.batch_size <= 0:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")
        tokenizer, backend = self._components()
        items = list(X)
        out = np.empty((len(items), len(CLASSES)), dtype=np.float64)
        for lo in range(0, len(items), self.batch_size):
            chunk = items[lo : lo + self.batch_size]
            ids, mask = encode_batch(chunk, tokenizer, self.max_seq_len, self.template)
            out[lo : lo + len(chunk)] = softmax(backend.logits(ids, mask), axis=1)
        return out

    def predict(self, X: Sequence[SentenceFeatures]) -> np.ndarray:
        """Hard labels: 1 where needs-citation is the likelier class."""
        return self.predict_proba(X).argmax(axis=1)

    def score_records(self, records: Iterable[SentenceRecord]) -> np.ndarray:
        """needs-citation probability for each record."""
        feats = [SentenceFeatures.from_record(r) for r in records]
        return self.predict_proba(feats)[:, 1]


# -- bundles ------------------------------------------------------------------

MODEL_FILE = "model.pt"
TOKENIZER_FILE = "tokenizer.json"
META_FILE = "meta.json"


def _require(meta: dict, field: str, kind: type) -> object:
    if field not in meta:
        raise BundleValidationError(field, "missing")
    value = meta[field]
    if isinstance(value, bool) or not isinstance(value, kind):
        raise BundleValidationError(field, f"expected {kind.__name__}, got {type(value).__name__}")
    return value


def load_bundle(
    path: str | Path,
    threads: int | None = None,
    batch_size: int = 32,
) -> ReferenceNeedClassifier:
    """Build a classifier from a bundle directory.

    A bundle holds the serialized model graph, the tokenizer file, and a
    metadata file naming the sequence budget, class order, model version,
    and feature template.
    """
    root = Path(path)
    if not root.is_dir():
        raise BundleValidationError("path", f"{root} is not a directory")
    meta_path = root / META_FILE
    if not meta_path.is_file():
        raise BundleValidationError(META_FILE, "missing")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise BundleValidationError(META_FILE, f"unreadable: {exc}") from exc
    if not isinstance(meta, dict):
        raise BundleValidationError(META_FILE, "not a JSON object")

    max_seq_len = _require(meta, "max_seq_len", int)
    if max_seq_len < 4:
        raise BundleValidationError("max_seq_len", f"must be at least 4, got {max_seq_len}")
    model_version = _require(meta, "model_version", int)
    if model_version < 0:
        raise BundleValidationError("model_version", "must be non-negative")
    template = _require(meta, "feature_template", str)
    template_fields(template)
    classes = meta.get("classes")
    if classes != list(CLASSES):
        raise BundleValidationError("classes", f"expected {list(CLASSES)}, got {classes!r}")

    tokenizer_path = root / TOKENIZER_FILE
    if not tokenizer_path.is_file():
        raise BundleValidationError(TOKENIZER_FILE, "missing")
    model_path = root / str(meta.get("model_file", MODEL_FILE))
    if not model_path.is_file():
        raise BundleValidationError(model_path.name, "missing")

    return ReferenceNeedClassifier(
        tokenizer=SubwordTokenizer(tokenizer_path),
        backend=TorchScriptBackend(model_path, threads=threads),
        max_seq_len=max_seq_len,
        template=template,
        batch_size=batch_size,
        model_version=model_version,
    )


def stub_classifier(seed: int = 0, max_seq_len: int = DEFAULT_MAX_SEQ_LEN) -> ReferenceNeedClassifier:
    """Dependency-free classifier with seeded pseudo-scores."""
    return ReferenceNeedClassifier(
        tokenizer=HashTokenizer(),
        backend=HashBackend(seed=seed),
        max_seq_len=max_seq_len,
    )
