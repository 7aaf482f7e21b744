import functools

import pytest

from fockdpp.kernel import build_kernel
from fockdpp.weights import PowerAlpha, RadiusField

# name -> (passed, detail), filled in by the acceptance tests
ACCEPTANCE = {}


def record(name, passed, detail=""):
    ACCEPTANCE[name] = (bool(passed), detail)


@functools.lru_cache(maxsize=None)
def radius_field(alpha):
    return RadiusField(PowerAlpha(alpha))


@functools.lru_cache(maxsize=None)
def kernel(alpha, window, tol=1e-10, rank=None, cap=2048):
    rf = radius_field(alpha)
    return build_kernel(rf.weight, rf, window, tol=tol, rank=rank, cap=cap)


@pytest.fixture(scope="session")
def rf_of():
    return radius_field


@pytest.fixture(scope="session")
def kernel_of():
    return kernel


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda s: int(s.split()[0])):
        ok, detail = ACCEPTANCE[name]
        tr.write_line("%s  %s  %s" % ("PASS" if ok else "FAIL", name, detail))
