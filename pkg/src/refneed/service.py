"""HTTP scoring service.

POST /v1/score takes {"rev_id": ..., "lang": ...}, fetches the revision,
and answers with the reference need score. The success body is serialized
by hand so the key order and float text are stable byte for byte:

    {"model_name":...,"model_version":...,"wiki_db":...,
     "revision_id":...,"reference_need_score":...}

Each request runs under a wall-clock budget; scoring checks the deadline
between model batches and aborts rather than answer late. A bounded
semaphore caps in-flight work, shedding load with 503 instead of queueing.
"""

from __future__ import annotations

import json
import threading
import time

from fastapi import FastAPI, Request, Response
from starlette.concurrency import run_in_threadpool

from .classifier import ReferenceNeedClassifier, stub_classifier
from .errors import (
    DeadlineExceeded,
    EmptyArticle,
    MalformedMarkup,
    RevisionNotFound,
    UnknownLanguage,
    UpstreamError,
    UpstreamTimeout,
)
from .pipeline import MediaWikiClient, score_online

MODEL_NAME = "reference-need"
DEFAULT_BUDGET_MS = 500.0
DEFAULT_MAX_INFLIGHT = 8

_RESPONSE_FIELDS = (
    "model_name",
    "model_version",
    "wiki_db",
    "revision_id",
    "reference_need_score",
)


def _json_response(payload: dict, status: int = 200) -> Response:
    return Response(
        content=json.dumps(payload, ensure_ascii=False, separators=(",", ":")),
        status_code=status,
        media_type="application/json",
    )


def _error(status: int, code: str, detail: str) -> Response:
    return _json_response({"error": code, "detail": detail}, status=status)


def score_payload(
    model_version: int, wiki_db: str, revision_id: int, score: float
) -> dict:
    """Success body with the exact field order of the wire contract."""
    payload = {
        "model_name": MODEL_NAME,
        "model_version": model_version,
        "wiki_db": wiki_db,
        "revision_id": revision_id,
        "reference_need_score": score,
    }
    assert tuple(payload) == _RESPONSE_FIELDS
    return payload


def _parse_score_request(raw: bytes) -> tuple[int, str]:
    try:
        body = json.loads(raw)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ValueError(f"body is not valid JSON: {exc}") from exc
    if not isinstance(body, dict):
        raise ValueError("body must be a JSON object")
    if "rev_id" not in body or "lang" not in body:
        raise ValueError("body must carry rev_id and lang")
    rev_id = body["rev_id"]
    lang = body["lang"]
    if isinstance(rev_id, bool) or not isinstance(rev_id, int) or rev_id <= 0:
        raise ValueError("rev_id must be a positive integer")
    if not isinstance(lang, str) or not lang:
        raise ValueError("lang must be a non-empty string")
    return rev_id, lang


def create_app(
    classifier: ReferenceNeedClassifier | None = None,
    client: MediaWikiClient | None = None,
    budget_ms: float = DEFAULT_BUDGET_MS,
    max_inflight: int = DEFAULT_MAX_INFLIGHT,
) -> FastAPI:
    """Build the service around a classifier and a revision source.

    Without arguments the app runs on the dependency-free hash scorer and a
    live wiki client, which is enough to stand up the full request path.
    """
    if budget_ms <= 0:
        raise ValueError(f"budget_ms must be positive, got {budget_ms}")
    if max_inflight < 1:
        raise ValueError(f"max_inflight must be at least 1, got {max_inflight}")
    clf = classifier if classifier is not None else stub_classifier()
    source = client if client is not None else MediaWikiClient()
    gate = threading.BoundedSemaphore(max_inflight)

    app = FastAPI(title="reference-need", docs_url=None, redoc_url=None)
    app.state.gate = gate

    @app.get("/healthz")
    async def healthz() -> Response:
        return _json_response({"status": "ok"})

    def _score_blocking(lang: str, rev_id: int) -> Response:
        deadline = time.perf_counter() + budget_ms / 1000.0

        def checkpoint():
            if time.perf_counter() > deadline:
                raise DeadlineExceeded(f"budget of {budget_ms}ms exhausted")

        result = score_online(source, lang, rev_id, clf, checkpoint=checkpoint)
        checkpoint()
        return _json_response(
            score_payload(
                clf.model_version, result.wiki_db, result.revision_id, result.score
            )
        )

    @app.post("/v1/score")
    async def score(request: Request) -> Response:
        raw = await request.body()
        try:
            rev_id, lang = _parse_score_request(raw)
        except ValueError as exc:
            return _error(400, "invalid_request", str(exc))

        if not gate.acquire(blocking=False):
            return _error(503, "overloaded", "too many requests in flight")
        try:
            return await run_in_threadpool(_score_blocking, lang, rev_id)
        except UnknownLanguage as exc:
            return _error(400, "unsupported_language", str(exc))
        except RevisionNotFound as exc:
            return _error(404, "revision_not_found", str(exc))
        except EmptyArticle as exc:
            return _error(422, "empty_article", str(exc))
        except MalformedMarkup as exc:
            return _error(422, "unparseable_revision", str(exc))
        except DeadlineExceeded as exc:
            return _error(504, "deadline_exceeded", str(exc))
        except UpstreamTimeout as exc:
            return _error(504, "upstream_timeout", str(exc))
        except UpstreamError as exc:
            return _error(502, "upstream_error", str(exc))
        finally:
            gate.release()

    return app
