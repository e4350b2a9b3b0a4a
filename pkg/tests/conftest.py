import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("qtomo", max_examples=40, deadline=None)
settings.load_profile("qtomo")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one PASS/FAIL line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_runtest_logreport(report):
    crit = getattr(report, "criterion", None)
    if crit is None and "test_acceptance.py::test_criterion_" in report.nodeid:
        crit = int(report.nodeid.split("test_criterion_")[1].split("_")[0])
    if crit is None or report.when != "call" and not (report.when == "setup" and report.failed):
        return
    lines = [ln for ln in report.capstdout.splitlines() if ln.startswith(f"criterion {crit}:")]
    detail = lines[-1].split(":", 1)[1].strip() if lines else report.nodeid.split("::")[-1]
    if not report.passed and not detail.startswith("FAIL"):
        detail = "FAIL  " + detail
    ACCEPTANCE[crit] = detail


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {crit}: {ACCEPTANCE[crit]}")
