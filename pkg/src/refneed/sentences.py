"""Sentence segmentation and reference-to-sentence assignment.

Segmentation treats the terminator run plus following whitespace as a
separator and drops it, so an internal sentence ends at its last word
("... is a \"clattering\"") while the final sentence of a paragraph keeps
its punctuation ("Another name for a flock is a \"train\"."). A terminator
shielded by closing quotes or brackets stays with its sentence. Fullwidth
terminators bound sentences without requiring whitespace, which covers
scripts written without spaces.

Reference anchors are assigned to sentences by extending each sentence span
rightward across whitespace and punctuation: a marker that follows the
period still counts for the sentence it cites.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import AnchorOutOfRange
from .wikitext import ParsedDocument, Paragraph, RefAnchor

Span = tuple[int, int]

TERMINATORS = frozenset(".!?。！？…")
# Fullwidth stops end a sentence even with no space after them.
_NOSPACE_TERMINATORS = frozenset("。！？…")
_CLOSERS = frozenset("\"')]»”’」』〉》）】")


def segment(text: str) -> list[Span]:
    """Split text into sentence spans (start, end) over the input string."""
    spans: list[Span] = []
    n = len(text)
    start = 0
    i = 0

    def emit(end: int):
        nonlocal start
        if end > start:
            spans.append((start, end))

    while i < n:
        if text[i] not in TERMINATORS:
            i += 1
            continue
        term_start = i
        while i < n and text[i] in TERMINATORS:
            i += 1
        closer_start = i
        while i < n and text[i] in _CLOSERS:
            i += 1
        closer_end = i
        space_start = i
        while i < n and text[i].isspace():
            i += 1

        if i == n:
            # Paragraph-final sentence keeps its punctuation.
            emit(closer_end)
            start = n
            break
        breaks_unspaced = any(c in _NOSPACE_TERMINATORS for c in text[term_start:closer_start])
        if i == space_start and not breaks_unspaced:
            # No gap ("3.5", "U.K.-based"): not a boundary.
            continue
        if closer_end > closer_start:
            # Terminator shielded by a closer stays in the sentence.
            emit(closer_end)
        else:
            # Terminator run plus gap is the separator; both are dropped.
            emit(term_start)
        start = i

    emit(n)
    return spans


def _is_extension_char(ch: str) -> bool:
    return ch.isspace() or unicodedata.category(ch).startswith("P")


def assign_labels(
    text: str, spans: Sequence[Span], anchors: Iterable[RefAnchor]
) -> list[bool]:
    """For each span, whether at least one anchor attaches to it.

    A span claims the region up to its end extended across trailing
    whitespace and punctuation; each anchor goes to the first span whose
    extended end reaches its offset.
    """
    n = len(text)
    labels = [False] * len(spans)
    if not spans:
        for anchor in anchors:
            if anchor.offset < 0 or anchor.offset > n:
                raise AnchorOutOfRange(anchor.offset, n)
        return labels

    extended: list[int] = []
    for _, end in spans:
        j = end
        while j < n and _is_extension_char(text[j]):
            j += 1
        extended.append(j)
    extended[-1] = n

    for anchor in anchors:
        if anchor.offset < 0 or anchor.offset > n:
            raise AnchorOutOfRange(anchor.offset, n)
        for idx, reach in enumerate(extended):
            if anchor.offset <= reach:
                labels[idx] = True
                break
    return labels


@dataclass(frozen=True)
class LabeledSentence:
    """One sentence with its paragraph context and citation evidence."""

    section_name: str
    sentence: str
    next_sent: str
    prev_sent: str
    paragraph: str
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


def sentences_of(paragraph: Paragraph, section_name: str) -> list[LabeledSentence]:
    """Segment one paragraph and label each sentence by its anchors."""
    text = paragraph.plaintext
    spans = segment(text)
    labels = assign_labels(text, spans, paragraph.anchors)
    out: list[LabeledSentence] = []
    for idx, (lo, hi) in enumerate(spans):
        prev_span = spans[idx - 1] if idx > 0 else None
        next_span = spans[idx + 1] if idx + 1 < len(spans) else None
        out.append(
            LabeledSentence(
                section_name=section_name,
                sentence=text[lo:hi],
                next_sent=text[next_span[0] : next_span[1]] if next_span else "",
                prev_sent=text[prev_span[0] : prev_span[1]] if prev_span else "",
                paragraph=text,
                label=int(labels[idx]),
            )
        )
    return out


def extract_sentences(doc: ParsedDocument) -> list[LabeledSentence]:
    """All sentences of a document outside its excluded sections."""
    out: list[LabeledSentence] = []
    for section in doc.sections:
        if section.excluded:
            continue
        for paragraph in section.paragraphs:
            out.extend(sentences_of(paragraph, section.title))
    return out
