import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from simwave.grid import RhoGrid
from simwave.pertop import make_config

settings.register_profile(
    "numerics", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("numerics")


@pytest.fixture(scope="session")
def grid():
    return RhoGrid(1025)


@pytest.fixture(scope="session")
def coarse():
    return RhoGrid(257)


@pytest.fixture(scope="session")
def cfg3():
    return make_config(3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# ---------------------------------------------------------------------------
# one PASS/FAIL line per acceptance criterion, printed after the run

_ACCEPTANCE = {}


class _Criterion:
    def __init__(self, number: int, title: str, limit_s: float):
        self.number, self.title, self.limit_s = number, title, limit_s
        self.details = []

    def note(self, text: str):
        self.details.append(text)


@pytest.fixture
def criterion(request):
    number, title, limit_s = request.node.get_closest_marker("criterion").args
    crit = _Criterion(number, title, limit_s)
    _ACCEPTANCE[number] = (crit, None)
    yield crit


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    number = marker.args[0]
    crit = _ACCEPTANCE.get(number, (None, None))[0]
    _ACCEPTANCE[number] = (crit, rep.passed)
    status = "PASS" if rep.passed else "FAIL"
    detail = "; ".join(crit.details) if crit else ""
    print(f"\nACCEPTANCE {number}: {status}  {marker.args[1]}  [{detail}]")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        crit, passed = _ACCEPTANCE[number]
        status = "PASS" if passed else "FAIL"
        title = crit.title if crit else ""
        detail = "; ".join(crit.details) if crit else ""
        terminalreporter.write_line(f"criterion {number}: {status}  {title}  [{detail}]")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title, limit_s): acceptance criterion")
