import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from exlens.geometry import ArrayGeometry, LensDesign

settings.register_profile("exlens", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("exlens")


@pytest.fixture
def design2():
    # D = 1 m, F = F0 = 5 m, lambda = 1 cm -> 201 antennas
    return LensDesign.design2(1.0, 5.0, 5.0, 0.01)


@pytest.fixture
def design1():
    return LensDesign.design1(1.0, 5.0, 0.01)


@pytest.fixture
def geom2(design2):
    return ArrayGeometry.lens(design2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
