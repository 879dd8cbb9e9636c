import os

import pytest
from hypothesis import HealthCheck, settings

from hbct import SystemParams, db_to_linear, place_nodes, sample_channels

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def default_params():
    return SystemParams()


@pytest.fixture
def flat_k3(default_params):
    return sample_channels(place_nodes(default_params), default_params, 0, fading=False)


def scenario(pt_db=40.0, num_hops=3, **kw):
    return SystemParams(num_hops=num_hops, pt_power=db_to_linear(pt_db), **kw)


def draw(params, seed=0, trial=0, fading=True):
    return sample_channels(place_nodes(params), params, seed, trial, fading=fading)


ACCEPTANCE_LINES = []


def record_criterion(name, passed, detail):
    line = f"criterion {name}: {'PASS' if passed else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
