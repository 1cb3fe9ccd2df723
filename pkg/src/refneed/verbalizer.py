"""Zero-shot citation-need scoring with an instruction-following model.

The sentence is embedded in a fixed editorial prompt that ends with a
quoted one-word answer. The prompt is scored twice, once ending in "yes"
and once in "no"; the probability of needing a citation is the softmax of
the two answer log-probabilities, which for two options reduces to the
logistic of their difference.
"""

from __future__ import annotations

import json
import os
import re
from pathlib import Path
from typing import Iterable, Protocol

import numpy as np
import requests
from scipy.special import expit

from .classifier import SentenceFeatures
from .errors import ClientError, MissingLogprob

ANSWERS = ("yes", "no")

PROMPT_TEMPLATE = """You are an experienced Wikipedia editor.

You are provided with a piece of text from a Wikipedia article enclosed in `<<>>`.
The language code of the article is `{{language}}`, and the section name is `{{section}}`.
Optionally, you may also be provided with context before
the text snippet (enclosed in `< context before >`) and
after the text snippet (enclosed in `<<< context after >>>`).

Follow these guidelines while making your assessment:

### Text that REQUIRES a citation:
- Text that includes facts likely to be challenged or not considered common knowledge.
- Statements that present opinions, analyses, or claims that need verification.
- Statistics, data, or direct quotations.
- Assertions that could be considered original research.

### Text that DOES NOT REQUIRE a citation:
- Text that is widely accepted as common knowledge.
- Content within sections where the main topic is already properly referenced.
- Plot summaries for works of fiction.
- Statements that are already supported by a preceding or nearby citation.
- Other cases where a citation is clearly redundant or unnecessary.

**Your task is to determine whether the text snippet in `<<>>`
requires a citation according to Wikipedia's citation policies.**

ANSWER FORMAT:
yes - Text to assess snippet requires a citation.
no - Text to assess snippet does NOT require a citation.

INPUT:
{{context_b}}
Text to assess: <<{{text}}>>
{{context_a}}
Answer: "{{answer}}\""""

_PLACEHOLDER = re.compile(r"\{\{(language|section|context_b|text|context_a|answer)\}\}")
_SNIPPET = re.compile(r"^Text to assess: <<(.*)>>$", re.MULTILINE)


def render_prompt(features: SentenceFeatures, answer: str) -> str:
    """The scoring prompt for one sentence, ending with the given answer.

    Context lines are dropped entirely when the neighboring sentence is
    empty, so the model never sees empty enclosures.
    """
    if answer not in ANSWERS:
        raise ValueError(f"answer must be one of {ANSWERS}, got {answer!r}")
    values = {
        "language": features.lang,
        "section": features.section_title,
        "text": features.sentence,
        "context_b": f"<{features.prev_sent}>" if features.prev_sent else "",
        "context_a": f"<<<{features.next_sent}>>>" if features.next_sent else "",
        "answer": answer,
    }
    rendered = _PLACEHOLDER.sub(lambda m: values[m.group(1)], PROMPT_TEMPLATE)
    lines = rendered.split("\n")
    anchor = lines.index("INPUT:")
    body = [line for line in lines[anchor:] if line]
    return "\n".join(lines[:anchor] + body)


def verbalizer_score(lp_yes: float, lp_no: float) -> float:
    """Softmax probability of "yes" from the two answer log-probabilities."""
    return float(expit(lp_yes - lp_no))


class VerbalizerClient(Protocol):
    def answer_logprob(self, prompt: str, answer: str) -> float: ...


def score_features(client: VerbalizerClient, features: SentenceFeatures) -> float:
    lp_yes = client.answer_logprob(render_prompt(features, "yes"), "yes")
    lp_no = client.answer_logprob(render_prompt(features, "no"), "no")
    return verbalizer_score(lp_yes, lp_no)


def verbalize_scores(
    client: VerbalizerClient, batch: Iterable[SentenceFeatures]
) -> np.ndarray:
    return np.asarray([score_features(client, f) for f in batch], dtype=np.float64)


class ReplayVerbalizerClient:
    """Serves recorded answer log-probabilities, keyed by the text snippet.

    The replay file maps each sentence to its "yes" and "no" scores, which
    makes the comparison pipeline runnable and exactly reproducible with no
    model behind it.
    """

    def __init__(self, table: dict[str, dict[str, float]]):
        self._table = table

    @classmethod
    def from_json(cls, path: str | Path) -> "ReplayVerbalizerClient":
        with open(path, "r", encoding="utf-8") as handle:
            return cls(json.load(handle))

    def answer_logprob(self, prompt: str, answer: str) -> float:
        if answer not in ANSWERS:
            raise ValueError(f"answer must be one of {ANSWERS}, got {answer!r}")
        m = _SNIPPET.search(prompt)
        if not m:
            raise MissingLogprob("prompt carries no text snippet to key on")
        key = m.group(1)
        entry = self._table.get(key)
        if entry is None or answer not in entry:
            raise MissingLogprob(f"no recorded {answer!r} score for {key!r}")
        return float(entry[answer])


class HTTPVerbalizerClient:
    """Scores answers through a completion endpoint that echoes logprobs.

    The endpoint, model name, and optional bearer token come from the
    REFNEED_LLM_ENDPOINT, REFNEED_LLM_MODEL, and REFNEED_LLM_TOKEN
    environment variables unless given explicitly.
    """

    def __init__(
        self,
        endpoint: str | None = None,
        model: str | None = None,
        token: str | None = None,
        session=None,
        timeout: float = 60.0,
    ):
        self.endpoint = endpoint or os.environ.get("REFNEED_LLM_ENDPOINT", "")
        self.model = model or os.environ.get("REFNEED_LLM_MODEL", "")
        self.token = token or os.environ.get("REFNEED_LLM_TOKEN", "")
        if not self.endpoint or not self.model:
            raise ClientError(
                "an endpoint and model are required; set REFNEED_LLM_ENDPOINT "
                "and REFNEED_LLM_MODEL"
            )
        self._session = session or requests.Session()
        self._timeout = timeout

    def answer_logprob(self, prompt: str, answer: str) -> float:
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        body = {
            "model": self.model,
            "prompt": prompt,
            "max_tokens": 0,
            "echo": True,
            "logprobs": 1,
        }
        try:
            response = self._session.post(
                self.endpoint, json=body, headers=headers, timeout=self._timeout
            )
        except requests.RequestException as exc:
            raise ClientError(f"completion request failed: {exc}") from exc
        if response.status_code != 200:
            raise ClientError(f"completion endpoint returned {response.status_code}")
        try:
            choice = response.json()["choices"][0]["logprobs"]
            tokens = choice["tokens"]
            logprobs = choice["token_logprobs"]
        except (ValueError, KeyError, IndexError) as exc:
            raise ClientError(f"malformed completion response: {exc}") from exc
        return _trailing_logprob(tokens, logprobs, answer)


def _trailing_logprob(tokens: list[str], logprobs: list[float | None], answer: str) -> float:
    """Summed log-probability of the tokens spelling the final answer word."""
    acc = 0.0
    text = ""
    for token, lp in zip(reversed(tokens), reversed(logprobs)):
        acc += 0.0 if lp is None else float(lp)
        text = token + text
        if answer in text:
            return acc
    raise MissingLogprob(f"echoed tokens never spell {answer!r}")
