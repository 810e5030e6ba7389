from __future__ import annotations

from collections import OrderedDict

import pytest

from chargerel.model import ChargerStatus, PeriodWindow, StatusSample

S = ChargerStatus
DAY = 86400

# criterion number -> (title, list of outcomes)
_CRITERIA: "OrderedDict[int, tuple[str, list[bool]]]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number")


def pytest_collection_modifyitems(session, config, items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            number, title = mark.args
            _CRITERIA.setdefault(number, (title, []))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark and not rep.skipped and (rep.when == "call" or rep.failed):
        _CRITERIA[mark.args[0]][1].append(rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcomes = _CRITERIA[number]
        if not outcomes:
            verdict = "NOT RUN"
        else:
            verdict = "PASS" if all(outcomes) else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict}  {title}")


@pytest.fixture
def day() -> PeriodWindow:
    return PeriodWindow(0, DAY, "day")


def samples(charger: str, *pairs: tuple[int, ChargerStatus]) -> list[StatusSample]:
    return [StatusSample(charger, at, st) for at, st in pairs]
