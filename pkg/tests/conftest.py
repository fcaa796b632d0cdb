import json
import re
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

_criteria = {}


@pytest.fixture(scope="session")
def derived():
    """Frozen oracle values (see tests/oracles.py)."""
    return json.loads((FIXTURES / "derived.json").read_text())


@pytest.fixture(scope="session")
def S_t2_n4():
    from orliczlab.sobolev import build_An
    from orliczlab.young import PowerYoung

    return build_An(PowerYoung(2.0), 4)


@pytest.fixture(scope="session")
def S_t15_n2():
    from orliczlab.sobolev import build_An
    from orliczlab.young import PowerYoung

    return build_An(PowerYoung(1.5), 2)


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", report.nodeid)
    if not m:
        return
    k = int(m.group(1))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria[k] = (report.outcome, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_criteria):
        outcome, dur = _criteria[k]
        word = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {k}: {word} ({dur:.2f} s)")
