"""Prints one PASS/FAIL line per acceptance criterion after the run."""

_RESULTS: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::" in report.nodeid and report.when == "call":
        name = report.nodeid.split("::", 1)[1]
        _RESULTS[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name in sorted(_RESULTS):
        terminalreporter.write_line(f"{_RESULTS[name]}  {name}")
