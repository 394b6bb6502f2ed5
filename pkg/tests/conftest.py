import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"


@pytest.fixture
def data_dir():
    return DATA


_CRITERIA: list[tuple[str, str, float]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported by name")


def pytest_runtest_logreport(report):
    marker = report.user_properties and dict(report.user_properties).get("criterion")
    if not marker:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _CRITERIA.append((marker, "PASS" if report.passed else "FAIL", report.duration))


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_makereport(item, call):
    m = item.get_closest_marker("criterion")
    if m and ("criterion", m.args[0]) not in item.user_properties:
        item.user_properties.append(("criterion", m.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, duration in _CRITERIA:
        terminalreporter.write_line(f"{outcome} {name} ({duration:.2f}s)")
