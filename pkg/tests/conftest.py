import re

import pytest

_CRITERIA = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = "; ".join(v for k, v in report.user_properties if k == "detail")
        _CRITERIA[n] = (report.outcome, report.nodeid.split("::")[-1], detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        outcome, name, detail = _CRITERIA[n]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {verdict}  {name}  {detail}")


@pytest.fixture
def tmp_cfg(tmp_path):
    """Write a key = value config into tmp_path and return its path."""

    def write(text, name="run.cfg"):
        path = tmp_path / name
        path.write_text(text)
        return path

    return write
