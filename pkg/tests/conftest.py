"""Prints a one-line verdict per acceptance criterion at the end of the run."""

import pytest

_verdicts = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    n, title = mark.args
    detail = dict(item.user_properties).get("detail", "")
    _verdicts[n] = ("PASS" if rep.passed else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_verdicts):
        verdict, title, detail = _verdicts[n]
        line = f"criterion {n:>2} {verdict}: {title}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
