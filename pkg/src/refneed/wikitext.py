"""Wikitext to plaintext conversion that keeps the positions of reference markers.

The parser reduces raw wiki markup to a section tree of plaintext paragraphs.
Reference markers (``<ref>`` tags, self-closing named-ref reuses, and
configured citation templates such as shortened footnotes) are replaced by
:class:`RefAnchor` entries recording where in the paragraph the marker stood.
Everything else that does not render as running text (other templates, HTML
comments, tables, file and category links) is stripped, and wiki links are
reduced to their display text.

The scanner is single pass with explicit recovery rules: an unclosed ref tag
or template consumes to the end of its line so the rest of the page survives.
It must never raise on arbitrary byte salad; MalformedMarkup is reserved for
inputs where recovery produced no paragraph at all.
"""

from __future__ import annotations

import html
import re
from dataclasses import dataclass, field

from .errors import MalformedMarkup
from .langconfig import LangConfig, normalize_name

# Private-use sentinels mark where a reference marker stood until paragraph
# assembly converts them to anchors. Input text is cleansed of them first.
_S_REF = ""
_S_REUSE = ""
_S_CITE = ""
_SENTINELS = _S_REF + _S_REUSE + _S_CITE
_SENTINEL_KIND = {_S_REF: "ref-tag", _S_REUSE: "named-ref-reuse", _S_CITE: "citation-template"}

ANCHOR_KINDS = ("ref-tag", "named-ref-reuse", "citation-template")


@dataclass(frozen=True)
class RawRevision:
    """One revision of a wiki page, as fetched from the wiki."""

    lang: str
    rev_id: int
    page_id: int
    page_title: str
    wikitext: str

    def __post_init__(self):
        if not self.lang:
            raise ValueError("lang must be non-empty")
        if self.rev_id <= 0:
            raise ValueError("rev_id must be positive")


@dataclass(frozen=True)
class RevisionMeta:
    """Revision identity without the markup payload."""

    lang: str
    rev_id: int
    page_id: int
    page_title: str

    @classmethod
    def of(cls, rev: RawRevision) -> "RevisionMeta":
        return cls(rev.lang, rev.rev_id, rev.page_id, rev.page_title)


@dataclass(frozen=True)
class RefAnchor:
    """Position of a removed reference marker within a paragraph's plaintext."""

    offset: int
    kind: str

    def __post_init__(self):
        if self.kind not in ANCHOR_KINDS:
            raise ValueError(f"unknown anchor kind {self.kind!r}")


@dataclass(frozen=True)
class Paragraph:
    plaintext: str
    anchors: tuple[RefAnchor, ...] = ()


@dataclass(frozen=True)
class Section:
    title: str
    excluded: bool
    paragraphs: tuple[Paragraph, ...] = ()


@dataclass(frozen=True)
class ParsedDocument:
    meta: RevisionMeta
    sections: tuple[Section, ...] = ()


# Extension tags whose contents never contribute sentences.
_DROP_WITH_CONTENT = {
    "math", "gallery", "timeline", "source", "syntaxhighlight", "score",
    "pre", "imagemap", "mapframe", "graph", "templatedata", "hiero", "chem",
    "references",
}

# Link namespaces stripped together with their targets. Localized aliases for
# the supported wikis are folded in; unknown prefixes pass through as links.
_MEDIA_NAMESPACES = {
    "file", "image", "media",
    "datei", "bild",              # de
    "fichier",                    # fr
    "archivo", "imagen",          # es
    "файл", "изображение",        # ru
    "ファイル", "画像",            # ja
    "ficheiro", "imagem",         # pt
    "文件", "檔案", "图像",        # zh
    "immagine",                   # it
    "پرونده",                     # fa
}
_CATEGORY_NAMESPACES = {
    "category",
    "kategorie",                  # de
    "catégorie",                  # fr
    "categoría",                  # es
    "категория",                  # ru
    "カテゴリ",                    # ja
    "categoria",                  # pt/it
    "分类", "分類",                # zh
    "رده",                        # fa
}

_TAG_NAME = re.compile(r"</?\s*([a-zA-Z][a-zA-Z0-9]*)")
_REF_NAME_ATTR = re.compile(r"\bname\s*=", re.IGNORECASE)
_MAGIC_WORD = re.compile(r"__[A-Z][A-Z0-9_]*__")
_HEADING = re.compile(r"^(={1,6})\s*(.*?)\s*(={1,6})\s*$")
_QUOTE_RUN = re.compile(r"''+")
_LIST_PREFIX = re.compile(r"^[*#:;]+\s*")
_HR_LINE = re.compile(r"^-{4,}\s*$")
# Leftover markup neutralized after scanning; removal loops to a fixed point
# because deleting one token can butt-join the halves of another.
_SCRUB = re.compile(r"\{\{|\}\}|</?ref", re.IGNORECASE)

_MAX_LINK_DEPTH = 40


def _strip_sentinels(text: str) -> str:
    for ch in _SENTINELS:
        if ch in text:
            text = text.replace(ch, "")
    return text


def _find_ci(text: str, needle: str, start: int) -> int:
    return text.lower().find(needle, start)


class _Scanner:
    """One pass over raw wikitext producing a sentinel-bearing text buffer."""

    def __init__(self, text: str, citation_templates: frozenset[str]):
        self.text = text
        self.lower = text.lower()
        self.cites = citation_templates
        self.out: list[str] = []
        self.malformed = False

    def run(self) -> str:
        self._scan(self.text, 0, len(self.text), 0)
        return "".join(self.out)

    def _emit(self, s: str):
        self.out.append(s)

    def _at_line_start(self, text: str, i: int) -> bool:
        return i == 0 or text[i - 1] == "\n"

    def _scan(self, text: str, i: int, end: int, depth: int):
        while i < end:
            ch = text[i]
            if ch == "<":
                i = self._angle(text, i, end)
            elif ch == "{" and text.startswith("{{", i, end):
                i = self._template(text, i, end)
            elif ch == "{" and text.startswith("{|", i, end) and self._at_line_start(text, i):
                i = self._table(text, i, end)
            elif ch == "[" and text.startswith("[[", i, end):
                i = self._wikilink(text, i, end, depth)
            elif ch == "[":
                i = self._extlink(text, i, end)
            elif ch == "'" and text.startswith("''", i, end):
                m = _QUOTE_RUN.match(text, i, end)
                i = m.end()
            elif ch == "_" and text.startswith("__", i, end):
                m = _MAGIC_WORD.match(text, i, end)
                if m and m.end() <= end:
                    i = m.end()
                else:
                    self._emit(ch)
                    i += 1
            else:
                self._emit(ch)
                i += 1

    # -- angle-bracket constructs ------------------------------------------

    def _angle(self, text: str, i: int, end: int) -> int:
        if text.startswith("<!--", i, end):
            close = text.find("-->", i + 4, end)
            return end if close < 0 else close + 3

        m = _TAG_NAME.match(text, i, end)
        if not m:
            self._emit("<")
            return i + 1
        name = m.group(1).lower()
        gt = text.find(">", m.end(), end)
        if gt < 0:
            # Dangling tag start: treat as literal text minus the bracket.
            self._emit("<")
            return i + 1
        header = text[i : gt + 1]
        closing = header.startswith("</")
        self_closing = header.rstrip(">").rstrip().endswith("/")

        if name == "ref" and not closing:
            return self._ref(text, i, gt, end, header, self_closing)
        if name == "nowiki":
            if closing or self_closing:
                return gt + 1
            close = _find_ci(text, "</nowiki", gt + 1)
            if close < 0 or close >= end:
                return gt + 1
            self._emit(text[gt + 1 : close])
            inner_gt = text.find(">", close, end)
            return (inner_gt + 1) if inner_gt >= 0 else end
        if name in _DROP_WITH_CONTENT:
            if closing or self_closing:
                return gt + 1
            close = _find_ci(text, f"</{name}", gt + 1)
            if close < 0 or close >= end:
                # Unclosed block tag: drop the rest of the line.
                nl = text.find("\n", gt + 1, end)
                return end if nl < 0 else nl + 1
            inner_gt = text.find(">", close, end)
            return (inner_gt + 1) if inner_gt >= 0 else end
        if name == "br":
            self._emit(" ")
            return gt + 1
        # Any other HTML-ish tag: drop the tag, keep the content.
        return gt + 1

    def _ref(self, text: str, i: int, gt: int, end: int, header: str, self_closing: bool) -> int:
        named = bool(_REF_NAME_ATTR.search(header))
        if self_closing:
            self._emit(_S_REUSE if named else _S_REF)
            return gt + 1
        close = _find_ci(text, "</ref", gt + 1)
        if close < 0 or close >= end:
            # Unclosed ref: assume the author meant end-of-line.
            self.malformed = True
            self._emit(_S_REF)
            nl = text.find("\n", gt + 1, end)
            return end if nl < 0 else nl
        self._emit(_S_REF)
        inner_gt = text.find(">", close, end)
        return (inner_gt + 1) if inner_gt >= 0 else end

    # -- braces -------------------------------------------------------------

    def _match_braces(self, text: str, i: int, end: int) -> int:
        """Index just past the ``}}`` matching the ``{{`` at i, or -1."""
        depth = 0
        j = i
        while j < end - 1:
            pair = text[j : j + 2]
            if pair == "{{":
                depth += 1
                j += 2
            elif pair == "}}":
                depth -= 1
                j += 2
                if depth == 0:
                    return j
            else:
                j += 1
        return -1

    def _template(self, text: str, i: int, end: int) -> int:
        close = self._match_braces(text, i, end)
        if close < 0:
            self.malformed = True
            nl = text.find("\n", i + 2, end)
            return end if nl < 0 else nl
        inner = text[i + 2 : close - 2]
        name = inner.split("|", 1)[0]
        if normalize_name(name) in self.cites:
            self._emit(_S_CITE)
        return close

    def _table(self, text: str, i: int, end: int) -> int:
        depth = 1
        j = text.find("\n", i, end)
        if j < 0:
            self.malformed = True
            return end
        while j >= 0 and j < end:
            line_end = text.find("\n", j + 1, end)
            stop = line_end if line_end >= 0 else end
            line = text[j + 1 : stop].lstrip()
            if line.startswith("{|"):
                depth += 1
            elif line.startswith("|}"):
                depth -= 1
                if depth == 0:
                    return stop if line_end >= 0 else end
            j = line_end
        self.malformed = True
        return end

    # -- brackets -------------------------------------------------------------

    def _match_brackets(self, text: str, i: int, end: int) -> int:
        depth = 0
        j = i
        while j < end - 1:
            pair = text[j : j + 2]
            if pair == "[[":
                depth += 1
                j += 2
            elif pair == "]]":
                depth -= 1
                j += 2
                if depth == 0:
                    return j
            else:
                j += 1
        return -1

    def _wikilink(self, text: str, i: int, end: int, depth: int) -> int:
        close = self._match_brackets(text, i, end)
        if close < 0 or depth >= _MAX_LINK_DEPTH:
            # Stray opener: drop the brackets, keep scanning the rest.
            return i + 2
        inner = text[i + 2 : close - 2]
        target, sep, display = inner.partition("|")
        prefix = normalize_name(target.split(":", 1)[0]) if ":" in target else ""
        if prefix in _CATEGORY_NAMESPACES or prefix in _MEDIA_NAMESPACES:
            return close
        shown = display if sep else target.lstrip(":")
        self._scan(shown, 0, len(shown), depth + 1)
        return close

    def _extlink(self, text: str, i: int, end: int) -> int:
        rest = text[i + 1 : i + 9].lower()
        if not (rest.startswith(("http://", "https://", "ftp://", "//")) or rest.startswith("mailto:")):
            self._emit("[")
            return i + 1
        nl = text.find("\n", i, end)
        stop = nl if nl >= 0 else end
        close = text.find("]", i + 1, stop)
        if close < 0:
            self._emit("[")
            return i + 1
        inner = text[i + 1 : close]
        parts = inner.split(None, 1)
        if len(parts) == 2:
            self._emit(parts[1])
        return close + 1


def _scrub(text: str) -> str:
    while True:
        cleaned = _SCRUB.sub("", text)
        if cleaned == text:
            return cleaned
        text = cleaned


@dataclass
class _Block:
    lines: list[str] = field(default_factory=list)
    is_list_item: bool = False


def _finalize_paragraph(block_text: str) -> Paragraph | None:
    """Collapse whitespace and convert sentinels to anchors."""
    chars: list[str] = []
    anchors: list[RefAnchor] = []
    pending_space = False
    for ch in block_text:
        if ch in _SENTINEL_KIND:
            anchors.append(RefAnchor(len(chars), _SENTINEL_KIND[ch]))
        elif ch.isspace():
            pending_space = True
        else:
            # Anchors recorded inside a whitespace run already point before
            # the single space this branch may flush.
            if pending_space and chars:
                chars.append(" ")
            pending_space = False
            chars.append(ch)
    plaintext = "".join(chars)
    if not plaintext:
        return None
    anchors = [RefAnchor(min(a.offset, len(plaintext)), a.kind) for a in anchors]
    return Paragraph(plaintext=plaintext, anchors=tuple(anchors))


def _blocks_to_paragraphs(body_lines: list[str]) -> list[Paragraph]:
    paragraphs: list[Paragraph] = []
    run: list[str] = []

    def flush():
        if run:
            para = _finalize_paragraph(" ".join(run))
            if para is not None:
                paragraphs.append(para)
            run.clear()

    for line in body_lines:
        stripped = line.strip()
        if not stripped or _HR_LINE.match(stripped):
            flush()
            continue
        m = _LIST_PREFIX.match(stripped)
        if m:
            # Each list item stands alone; bullets carry no paragraph context.
            flush()
            item = _finalize_paragraph(stripped[m.end():])
            if item is not None:
                paragraphs.append(item)
            continue
        run.append(stripped)
    flush()
    return paragraphs


def normalize_title(title: str) -> str:
    """Section titles compare markup-free, trimmed, lowercased."""
    return normalize_name(_scrub(_strip_sentinels(title)))


def is_excluded_section(title: str, config: LangConfig) -> bool:
    """True iff the normalized title is on the language's exclusion list."""
    return normalize_title(title) in config.excluded_sections


def parse_document(rev: RawRevision, config: LangConfig) -> ParsedDocument:
    """Parse one revision's wikitext into sections of anchored paragraphs."""
    meta = RevisionMeta.of(rev)
    source = _strip_sentinels(rev.wikitext)
    scanner = _Scanner(source, config.citation_templates)
    buffer = _scrub(html.unescape(scanner.run()))

    sections: list[Section] = []
    seen: set[tuple] = set()
    current_title = ""
    current_lines: list[str] = []

    def close_section():
        paragraphs = _blocks_to_paragraphs(current_lines)
        if not paragraphs:
            return
        title = normalize_title(current_title)
        section = Section(
            title=title,
            excluded=title in config.excluded_sections,
            paragraphs=tuple(paragraphs),
        )
        key = (section.title, section.paragraphs)
        if key in seen:
            return
        seen.add(key)
        sections.append(section)

    for line in buffer.split("\n"):
        m = _HEADING.match(line)
        if m and m.group(2):
            close_section()
            current_title = m.group(2)
            current_lines = []
        else:
            current_lines.append(line)
    close_section()

    if scanner.malformed and not sections and source.strip():
        raise MalformedMarkup(
            f"no paragraph recoverable from revision {rev.rev_id} ({rev.lang})"
        )
    return ParsedDocument(meta=meta, sections=tuple(sections))


def detect_featured(wikitext: str, config: LangConfig) -> bool:
    """True iff any configured featured-article template is invoked in the text."""
    if not wikitext or not config.featured_templates:
        return False
    text = re.sub(r"<!--.*?-->", "", wikitext, flags=re.DOTALL)
    names = "|".join(
        re.escape(t).replace(r"\ ", r"[\s_]+") for t in config.featured_templates
    )
    pattern = re.compile(r"\{\{\s*(?:" + names + r")\s*(?:\||\}\})", re.IGNORECASE)
    return bool(pattern.search(text))
