import sys
from pathlib import Path

import pytest

# oracles live next to the tests
sys.path.insert(0, str(Path(__file__).parent))

_criteria: list[tuple[str, str, float]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = "PASS" if rep.outcome == "passed" else "FAIL"
        _criteria.append((marker.args[0], status, rep.duration))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, duration in _criteria:
        terminalreporter.write_line(f"{status}  {name}  ({duration:.2f} s)")
