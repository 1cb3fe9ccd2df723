"""Session fixtures (one trained model) and the acceptance terminal summary."""

from __future__ import annotations

import pytest

from refneed_trainer import fine_tune, save_checkpoint

from synth import small_config, synth_records

try:
    from transformers.utils import logging as hf_logging

    hf_logging.disable_progress_bar()
except ImportError:
    pass


@pytest.fixture(scope="session")
def trained_small():
    return fine_tune(synth_records(120, 1), synth_records(40, 2), small_config())


@pytest.fixture(scope="session")
def float_checkpoint(tmp_path_factory, trained_small):
    return save_checkpoint(trained_small, tmp_path_factory.mktemp("ckpt"))


# -- acceptance summary --------------------------------------------------------

_acceptance_outcomes: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_trainer_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance_outcomes[name] = report.outcome.upper()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_outcomes:
        return
    terminalreporter.section("trainer acceptance")
    for name, outcome in _acceptance_outcomes.items():
        terminalreporter.write_line(f"{outcome:>7}  {name}")
