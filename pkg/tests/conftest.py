from __future__ import annotations

from pathlib import Path

import pytest

from attackplan.exploitdb import load_catalog
from attackplan.scenario import export_workspace, load_ground_truth
from attackplan.transform import Goal, transform

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text()


@pytest.fixture(scope="session")
def hp_catalog():
    return load_catalog(fixture_text("hp_openview_catalog.json"))


@pytest.fixture(scope="session")
def chain_gt():
    return load_ground_truth(fixture_text("pivot_chain_gt.json"))


@pytest.fixture(scope="session")
def chain_catalog():
    return load_catalog(fixture_text("pivot_chain_catalog.json"))


@pytest.fixture(scope="session")
def chain_task(chain_gt, chain_catalog):
    goal = Goal.compromise("10.0.5.12")
    return transform(export_workspace(chain_gt), chain_catalog, goal), goal


# -- acceptance report --------------------------------------------------------

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria[number] = ("PASS" if report.passed else "FAIL", title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        status, title = _criteria[number]
        terminalreporter.write_line(f"{status} criterion {number}: {title}")
