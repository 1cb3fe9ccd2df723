"""Shared test helpers: canned revisions, a fake wiki API, note collection."""

from __future__ import annotations

from pathlib import Path

from refneed.wikitext import RawRevision

JACKDAW_WIKITEXT = """{{Featured article}}
{{Use dmy dates|date=2020}}
'''Western jackdaws''' are [[corvid]] birds found across Europe.<ref>Smith 2000.</ref> They nest in cavities and chimneys of buildings. The species forms lifelong pair bonds with a single partner.

== Systematics ==
An archaic collective noun for a group of jackdaws is a "clattering".<ref name="lipton">Lipton 1991.</ref> Another name for a flock is a "train".{{sfn|Greenoak|1997}}

== Behaviour ==
Jackdaws roost communally in large flocks during winter months. Their calls carry over long distances in open country.<ref name="lipton" />

== See also ==
* [[Corvidae]]

== References ==
{{reflist}}
"""

REPLAY_FIXTURE = Path(__file__).parent / "fixtures" / "verbalizer_replay.json"

# Tests in test_acceptance.py get one pass/fail line in the terminal summary;
# they may append human-readable measurements here.
acceptance_notes: list[str] = []


def api_payload(rev: RawRevision) -> dict:
    """The wiki API response shape for one revision query."""
    return {
        "batchcomplete": True,
        "query": {
            "pages": [
                {
                    "pageid": rev.page_id,
                    "ns": 0,
                    "title": rev.page_title,
                    "revisions": [
                        {
                            "revid": rev.rev_id,
                            "parentid": rev.rev_id - 1,
                            "slots": {
                                "main": {
                                    "contentmodel": "wikitext",
                                    "contentformat": "text/x-wiki",
                                    "content": rev.wikitext,
                                }
                            },
                        }
                    ],
                }
            ]
        },
    }


class FakeResponse:
    def __init__(self, payload: dict | None, status_code: int = 200, text: str = ""):
        self._payload = payload
        self.status_code = status_code
        self._text = text

    def json(self) -> dict:
        if self._payload is None:
            raise ValueError(f"not JSON: {self._text!r}")
        return self._payload


class FakeSession:
    """Stands in for requests.Session; serves queued responses in order."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.calls: list[dict] = []

    def get(self, url, params=None, timeout=None):
        self.calls.append({"url": url, "params": dict(params or {}), "timeout": timeout})
        item = self.responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item
