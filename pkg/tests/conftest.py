import logging

import pytest

# One summary line per acceptance criterion, filled in by the ``criterion`` fixture.
_CRITERIA: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    number = marker.args[0]

    def report(ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {detail}"
        _CRITERIA[number] = line
        print(line)
        return ok

    return report


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker and rep.when == "call" and rep.failed and marker.args[0] not in _CRITERIA:
        _CRITERIA[marker.args[0]] = f"criterion {marker.args[0]:2d} FAIL: raised {call.excinfo.typename}"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[number])


@pytest.fixture(autouse=True)
def _quiet_extractor_warnings():
    # Concordance warnings are expected on noisy toy families.
    logger = logging.getLogger("subarch.extractor")
    level = logger.level
    logger.setLevel(logging.ERROR)
    yield
    logger.setLevel(level)
