import sys
import numpy as np
import pytest
from hypothesis import settings

from bas_spectra.flows import catalog_flow

settings.register_profile("default", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("default")

CATALOG = {
    "constant2d": ("constant", [1.0, 0.0]),
    "constant3d": ("constant", [0.3, 0.2, 1.0]),
    "shear": ("shear", [1.0]),
    "cellular": ("cellular", [1.0]),
    "abc": ("abc", [1.0, 1.0, 1.0]),
}


@pytest.fixture(scope="session")
def flows():
    return {k: catalog_flow(name, p) for k, (name, p) in CATALOG.items()}


@pytest.fixture(scope="session")
def cellular():
    return catalog_flow("cellular", [1.0])


@pytest.fixture(scope="session")
def shear():
    return catalog_flow("shear", [1.0])


def rand_unit(rng, n):
    v = rng.normal(size=n)
    return v / np.linalg.norm(v)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if not mod or not getattr(mod, "LINES", None):
        return
    terminalreporter.section("acceptance criteria")
    for i in sorted(mod.LINES):
        terminalreporter.write_line(mod.LINES[i])
