"""End-to-end revision scoring: fetch, parse, classify, aggregate.

The reference need score of a revision is

    score = flagged / (cited + flagged)

where cited counts sentences that already carry a reference marker and
flagged counts uncited sentences the classifier predicts as needing one.
Cited sentences are never run through the model; they enter the score only
through the denominator. An article with no cited and no flagged sentences
scores 0.0.
"""

from __future__ import annotations

import json
import time
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import requests

from .classifier import ReferenceNeedClassifier, SentenceFeatures
from .dataset import SentenceRecord, filter_records, records_from_document, wiki_db_of
from .errors import (
    EmptyArticle,
    RevisionNotFound,
    UpstreamError,
    UpstreamTimeout,
)
from .langconfig import LangConfig, get_config
from .sentences import extract_sentences
from .wikitext import ParsedDocument, RawRevision, parse_document, detect_featured

USER_AGENT = "refneed/0.1 (reference-need scoring; python-requests)"


def compute_rn(cited: int, flags: Sequence[int]) -> float:
    """Reference need score from cited-sentence count and uncited flags."""
    if cited < 0:
        raise ValueError(f"cited count must be non-negative, got {cited}")
    total = 0
    for flag in flags:
        value = int(flag)
        if value not in (0, 1) or flag != value:
            raise ValueError(f"flags must be 0 or 1, got {flag!r}")
        total += value
    denom = cited + total
    if denom == 0:
        return 0.0
    return total / denom


@dataclass(frozen=True)
class ScoreResult:
    wiki_db: str
    revision_id: int
    cited: int
    uncited: int
    flagged: int
    score: float


def score_document(
    doc: ParsedDocument,
    classifier: ReferenceNeedClassifier,
    checkpoint: Callable[[], None] | None = None,
) -> ScoreResult:
    """Score one parsed revision.

    ``checkpoint`` runs before every model batch so a caller can abort a
    computation that has outlived its deadline.
    """
    sentences = extract_sentences(doc)
    if not sentences:
        raise EmptyArticle(
            f"revision {doc.meta.rev_id} has no scorable sentences"
        )
    cited = sum(1 for s in sentences if s.label == 1)
    uncited = [s for s in sentences if s.label == 0]

    features = [
        SentenceFeatures(
            lang=doc.meta.lang,
            section_title=s.section_name,
            sentence=s.sentence,
            next_sent=s.next_sent,
            prev_sent=s.prev_sent,
        )
        for s in uncited
    ]
    step = max(1, classifier.batch_size)
    flags: list[int] = []
    for lo in range(0, len(features), step):
        if checkpoint is not None:
            checkpoint()
        flags.extend(int(v) for v in classifier.predict(features[lo : lo + step]))

    return ScoreResult(
        wiki_db=wiki_db_of(doc.meta.lang),
        revision_id=doc.meta.rev_id,
        cited=cited,
        uncited=len(uncited),
        flagged=sum(flags),
        score=compute_rn(cited, flags),
    )


def score_revision(
    rev: RawRevision,
    classifier: ReferenceNeedClassifier,
    config: LangConfig | None = None,
    checkpoint: Callable[[], None] | None = None,
) -> ScoreResult:
    cfg = config if config is not None else get_config(rev.lang)
    return score_document(parse_document(rev, cfg), classifier, checkpoint)


class MediaWikiClient:
    """Fetches revision wikitext by revision id, with retries and a small cache.

    Any object exposing ``get(url, params=..., timeout=...)`` can stand in
    for the session, which keeps network out of the tests.
    """

    def __init__(
        self,
        session=None,
        timeout: float = 10.0,
        retries: int = 3,
        backoff: float = 0.25,
        cache_size: int = 128,
    ):
        if retries < 1:
            raise ValueError("retries must be at least 1")
        if session is None:
            session = requests.Session()
            session.headers["User-Agent"] = USER_AGENT
        self._session = session
        self._timeout = timeout
        self._retries = retries
        self._backoff = backoff
        self._cache: OrderedDict[tuple[str, int], RawRevision] = OrderedDict()
        self._cache_size = cache_size

    def fetch_revision(self, lang: str, rev_id: int) -> RawRevision:
        get_config(lang)
        key = (lang, rev_id)
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]

        payload = self._request(lang, rev_id)
        rev = self._parse_payload(lang, rev_id, payload)
        self._cache[key] = rev
        while len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return rev

    def _request(self, lang: str, rev_id: int) -> dict:
        url = f"https://{lang}.wikipedia.org/w/api.php"
        params = {
            "action": "query",
            "prop": "revisions",
            "revids": str(rev_id),
            "rvprop": "ids|content",
            "rvslots": "main",
            "format": "json",
            "formatversion": "2",
        }
        last_error: Exception | None = None
        for attempt in range(self._retries):
            if attempt:
                time.sleep(self._backoff * 2 ** (attempt - 1))
            try:
                response = self._session.get(url, params=params, timeout=self._timeout)
            except requests.Timeout as exc:
                raise UpstreamTimeout(f"wiki API timed out after {self._timeout}s") from exc
            except requests.RequestException as exc:
                last_error = exc
                continue
            status = getattr(response, "status_code", 200)
            if status >= 500:
                last_error = UpstreamError(status, "server error")
                continue
            if status >= 400:
                raise UpstreamError(status, "client error from wiki API")
            try:
                return response.json()
            except ValueError as exc:
                raise UpstreamError(status, f"non-JSON response: {exc}") from exc
        if isinstance(last_error, UpstreamError):
            raise last_error
        raise UpstreamError(0, f"cannot reach wiki API: {last_error}")

    @staticmethod
    def _parse_payload(lang: str, rev_id: int, payload: dict) -> RawRevision:
        query = payload.get("query") or {}
        bad = query.get("badrevids")
        if bad and str(rev_id) in {str(k) for k in bad}:
            raise RevisionNotFound(lang, rev_id)
        pages = query.get("pages") or []
        for page in pages:
            for revision in page.get("revisions") or []:
                if revision.get("revid") != rev_id:
                    continue
                slot = (revision.get("slots") or {}).get("main") or {}
                content = slot.get("content")
                if content is None:
                    raise UpstreamError(200, f"revision {rev_id} has no main slot content")
                return RawRevision(
                    lang=lang,
                    rev_id=rev_id,
                    page_id=int(page.get("pageid", 0)),
                    page_title=str(page.get("title", "")),
                    wikitext=str(content),
                )
        raise RevisionNotFound(lang, rev_id)


def score_online(
    client: MediaWikiClient,
    lang: str,
    rev_id: int,
    classifier: ReferenceNeedClassifier,
    checkpoint: Callable[[], None] | None = None,
) -> ScoreResult:
    """Fetch a revision and score it."""
    rev = client.fetch_revision(lang, rev_id)
    return score_revision(rev, classifier, checkpoint=checkpoint)


# -- corpus construction -------------------------------------------------------


def load_revisions(path: str | Path) -> list[RawRevision]:
    """Read revisions from a JSONL file of lang/rev_id/page_id/page_title/wikitext."""
    out = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            out.append(
                RawRevision(
                    lang=row["lang"],
                    rev_id=int(row["rev_id"]),
                    page_id=int(row["page_id"]),
                    page_title=row["page_title"],
                    wikitext=row["wikitext"],
                )
            )
    return out


def build_corpus(
    revisions: Iterable[RawRevision], require_featured: bool = True
) -> list[SentenceRecord]:
    """Sentence records from revisions, filtered for length and duplicates.

    With ``require_featured`` set, revisions whose markup does not invoke a
    featured-article template are skipped.
    """
    records: list[SentenceRecord] = []
    for rev in revisions:
        config = get_config(rev.lang)
        if require_featured and not detect_featured(rev.wikitext, config):
            continue
        doc = parse_document(rev, config)
        records.extend(records_from_document(doc))
    return filter_records(records)
