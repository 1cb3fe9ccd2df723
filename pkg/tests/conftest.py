"""Fixtures over the shared helpers, plus the acceptance terminal summary."""

from __future__ import annotations

import json

import pytest

from refneed.wikitext import RawRevision

from support import JACKDAW_WIKITEXT, REPLAY_FIXTURE, FakeResponse, FakeSession, acceptance_notes, api_payload


@pytest.fixture
def jackdaw_revision() -> RawRevision:
    return RawRevision(
        lang="en",
        rev_id=1223095791,
        page_id=212989,
        page_title="Western jackdaw",
        wikitext=JACKDAW_WIKITEXT,
    )


@pytest.fixture
def fake_session_for(jackdaw_revision):
    def build(*responses):
        if not responses:
            responses = (FakeResponse(api_payload(jackdaw_revision)),)
        return FakeSession(responses)

    return build


@pytest.fixture
def replay_table() -> dict:
    """Twenty recorded yes/no logprobs keyed by sentence text.

    Scores lean toward the label but with deliberate overlap and one exact
    tie, so ranking metrics on them are non-trivial.
    """
    return json.loads(REPLAY_FIXTURE.read_text(encoding="utf-8"))


@pytest.fixture
def replay_file(tmp_path, replay_table):
    path = tmp_path / "replay.json"
    path.write_text(
        json.dumps({k: {"yes": v["yes"], "no": v["no"]} for k, v in replay_table.items()}),
        encoding="utf-8",
    )
    return path


# -- acceptance summary --------------------------------------------------------

_acceptance_outcomes: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance_outcomes[name] = report.outcome.upper()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_outcomes:
        return
    terminalreporter.section("acceptance")
    for name, outcome in _acceptance_outcomes.items():
        terminalreporter.write_line(f"{outcome:>7}  {name}")
    for note in acceptance_notes:
        terminalreporter.write_line(f"   note  {note}")
