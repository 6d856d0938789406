import gmpy2
import pytest
from gmpy2 import mpc, mpfr

from qcfrac.qnum import Precision, active


@pytest.fixture(scope="session")
def prec():
    return Precision(digits=50)


@pytest.fixture(scope="session")
def prec30():
    return Precision(digits=30)


@pytest.fixture(scope="session")
def prec100():
    return Precision(digits=100)


def cnum(re, im=0):
    """mpc from decimal strings or floats; mpc(str, str) would misparse."""
    return mpc(mpfr(re), mpfr(im))


def rel_diff(x, y):
    scale = max(abs(mpc(x)), abs(mpc(y)), mpfr(1))
    return float(abs(mpc(x) - mpc(y)) / scale)


def assert_close(x, y, tol, label=""):
    d = rel_diff(x, y)
    assert d < tol, f"{label} rel diff {d} >= {tol}: {x} vs {y}"
