import sys
from pathlib import Path

import pytest

TESTS = Path(__file__).resolve().parent
sys.path.insert(0, str(TESTS))

FIXTURES = TESTS / "fixtures"
PIPELINE_FIXTURE = FIXTURES / "pipeline"

_acceptance: dict[int, tuple[str, str]] = {}


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def _criterion(item) -> int | None:
    marker = item.get_closest_marker("criterion")
    return marker.args[0] if marker else None


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    n = _criterion(item)
    if n is None:
        return
    # a criterion fails if any phase fails; setup errors count too
    if report.failed:
        _acceptance[n] = ("FAIL", item.name)
    elif report.when == "call" and n not in _acceptance:
        _acceptance[n] = ("PASS", item.name)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_acceptance):
        verdict, name = _acceptance[n]
        terminalreporter.write_line(f"criterion {n:2d}: {verdict}  ({name})")
