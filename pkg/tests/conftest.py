"""Collect acceptance-criterion outcomes and print one verdict line per criterion."""

import pytest

_OUTCOMES = {}
_NOTES = []


@pytest.fixture
def note():
    """Record a measured value to show under the acceptance verdicts."""
    return _NOTES.append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = tuple(marker.args)


def pytest_runtest_logreport(report):
    criterion = getattr(report, "criterion", None)
    if criterion is None:
        return
    # a test counts once: its call phase, or whichever phase failed or skipped
    if report.when == "call" or report.outcome != "passed":
        counts = _OUTCOMES.setdefault(criterion, {"passed": 0, "failed": 0, "skipped": 0})
        counts[report.outcome] += 1


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), counts in sorted(_OUTCOMES.items()):
        if counts["failed"]:
            verdict = "FAIL"
        elif counts["passed"]:
            verdict = "PASS"
        else:
            verdict = "SKIP"
        terminalreporter.write_line(
            f"criterion {number} ({title}): {verdict}  [{counts['passed']} passed, {counts['failed']} failed]"
        )
    for line in _NOTES:
        terminalreporter.write_line(f"  {line}")
