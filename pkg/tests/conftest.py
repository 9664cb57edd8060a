import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from smokerisk.fixtures import make_screening_table, write_fixture

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def screening_table():
    return make_screening_table(n=400, seed=7, missing_rate=0.01)


@pytest.fixture(scope="session")
def screening_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "screening.csv"
    write_fixture(path, n=500, seed=11, missing_rate=0.01)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------- acceptance report

_CRITERIA = {}
_RANK = {"PASS": 0, "SKIP": 1, "FAIL": 2}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "PASS" if rep.passed else "SKIP" if rep.skipped else "FAIL"
        n, title = mark.args
        note = ""
        if rep.skipped and isinstance(rep.longrepr, tuple):
            note = rep.longrepr[2].removeprefix("Skipped: ")
        prev = _CRITERIA.get(n)
        # several tests may cover one criterion; the worst outcome wins
        if prev is None or _RANK[status] > _RANK[prev[0]]:
            _CRITERIA[n] = (status, title, note)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(_CRITERIA):
        status, title, note = _CRITERIA[n]
        line = f"criterion {n:2d}: {status}  {title}"
        terminalreporter.write_line(line + (f"  ({note})" if note else ""))
