import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pas4d.constellation import build_ask
from pas4d.lut import build_lut, lut_source

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def ask4():
    return build_ask(4)


@pytest.fixture(scope="session")
def ask16():
    return build_ask(16)


@pytest.fixture(scope="session")
def lut4_k2(ask4):
    return build_lut(ask4, 2)


@pytest.fixture(scope="session")
def lut16_k9(ask16):
    return build_lut(ask16, 9)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance_results(request):
    return request.config.stash.setdefault(_ACCEPTANCE_KEY, {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_ACCEPTANCE_KEY, None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, title, detail = results[n]
        terminalreporter.write_line(f"CRITERION {n} {'PASS' if ok else 'FAIL'}: {title} | {detail}")
