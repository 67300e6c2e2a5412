from __future__ import annotations

import pytest

from nbreval.core import Basket
from nbreval.ingest import split_per_user

_acceptance: dict[str, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    crit_id, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        prev = _acceptance.get(crit_id)
        # a criterion split over several tests fails if any part fails
        if prev is None or prev[0] == "PASS" or status == "FAIL":
            _acceptance[crit_id] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for crit_id in sorted(_acceptance, key=lambda c: int(c.lstrip("AC"))):
        status, title = _acceptance[crit_id]
        terminalreporter.write_line(f"[{status}] {crit_id}: {title}")


def make_bundle(users: dict[str, list[list[str]]], name: str = "toy"):
    """Bundle from plain per-user lists of item-key lists; timestamps are basket indices."""
    seqs = {u: [Basket(t, frozenset(items)) for t, items in enumerate(bs)] for u, bs in users.items()}
    return split_per_user(seqs, (0.72, 0.08, 0.20), name)


@pytest.fixture
def toy_bundle():
    return make_bundle(
        {
            "alice": [["a", "b"], ["a", "c"], ["b"], ["a", "d"], ["a", "b", "e"]],
            "bob": [["c"], ["c", "d"], ["d"], ["c", "f"]],
            "carol": [["e", "f"], ["a"], ["f", "g"]],
        }
    )
