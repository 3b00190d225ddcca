import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from beamtrack.codebook import AngularGrid, build_codebook
from beamtrack.geometry import ArrayConfig

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def array():
    return ArrayConfig()


@pytest.fixture(scope="session")
def grid(array):
    return AngularGrid.for_array(array)


@pytest.fixture(scope="session")
def cb(array, grid):
    return build_codebook(array, grid)


@pytest.fixture(scope="session")
def cb_ideal(array, grid):
    return build_codebook(array, grid, mode="ideal")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_posterior(rng, n=64, alpha=0.3):
    return rng.dirichlet(np.full(n, alpha))


# acceptance criteria report: one line per criterion in the terminal summary
_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): numbered acceptance criterion")
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance checks")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    number, title = mark.args
    detail = ", ".join(f"{k}={v}" for k, v in item.user_properties)
    _criteria[number] = (title, rep.outcome, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, outcome, detail = _criteria[number]
        status = "PASS" if outcome == "passed" else "FAIL"
        line = f"[{status}] {number:2d}. {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
