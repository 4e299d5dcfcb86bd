import pytest
from hypothesis import settings

from spikenas.genome import RunConfig, SearchSpaceTier

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# criterion number -> (title, outcome); filled by the ``criterion`` marker hook
_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not (report.when == "setup" and report.failed):
        return
    num, title = marker.args
    prev = _CRITERIA.get(num, (title, "PASS"))[1]
    status = "PASS" if report.passed and prev == "PASS" else "FAIL"
    _CRITERIA[num] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, status = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num}: {status}  {title}")


@pytest.fixture
def cfg():
    return RunConfig()


@pytest.fixture
def micro_tier():
    return SearchSpaceTier("micro", (64, 128, 64), (3, 4, 1), (4, 4, 4), (1, 2, 1))


@pytest.fixture
def point_tier():
    return SearchSpaceTier("point", (192, 192, 1), (4, 4, 1), (4, 4, 4), (2, 2, 1))
