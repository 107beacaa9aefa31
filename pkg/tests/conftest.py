from __future__ import annotations

import pytest

_CRITERION_RESULTS: list[tuple[str, bool]] = []


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(name): acceptance criterion shown in the summary"
    )


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    name = getattr(report, "_criterion_name", None)
    if name:
        _CRITERION_RESULTS.append((name, report.passed))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker:
        report._criterion_name = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERION_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, passed in _CRITERION_RESULTS:
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {name}")
