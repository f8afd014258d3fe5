"""Print a one-line verdict per acceptance criterion at the end of the run."""

import pytest

_verdicts: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not report.failed:
        return
    number, title = marker.args
    entry = _verdicts.setdefault(number, [title, True, []])
    if report.failed:
        entry[1] = False
        entry[2].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_verdicts):
        title, ok, failed = _verdicts[number]
        tail = "" if ok else f"  (failed: {', '.join(failed)})"
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}{tail}")
