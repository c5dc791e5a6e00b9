"""Collect per-criterion results from the acceptance module and summarise them."""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

CRITERIA = {
    1: "round-trip oracle on a 12-auction synthetic world",
    2: "clearing matches enumeration; permutation invariance",
    3: "penalty arithmetic and calibrated full-minus-net gap",
    4: "realisation and penalty share fixtures",
    5: "rank test, OLS recovery and residual noise",
    6: "uniform-price values equal the marginal bid",
    7: "register-driven pipeline (headline figures need the real registers)",
    8: "synth + link + analyze determinism",
}

_results: dict[int, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion the test belongs to")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    if report.when == "call" or report.outcome != "passed":
        _results.setdefault(marker, []).append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("criterion")
    if m is not None:
        outcome.get_result().criterion = m.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n, desc in CRITERIA.items():
        outcomes = _results.get(n)
        if not outcomes:
            status = "NOT RUN"
        elif all(o == "passed" for o in outcomes):
            status = "PASS"
        else:
            status = "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status:<7} {desc}")
