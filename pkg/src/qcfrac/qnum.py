"""Arbitrary-precision scalar layer: precision policy and q-shifted factorials.

All public operations take an explicit Precision and run under a gmpy2
context derived from it, so results are reproducible regardless of the
caller's ambient context.
"""

from __future__ import annotations

import contextlib
import dataclasses
from fractions import Fraction

import gmpy2
from gmpy2 import mpc, mpfr

from ._backend import KERNEL_BACKEND, kernels
from .errors import BadBase, SingularFactor

__all__ = [
    "BigComplex",
    "KERNEL_BACKEND",
    "Precision",
    "SeriesValue",
    "active",
    "is_near",
    "qpoch",
    "qpoch_inf",
    "qpoch_multi",
    "shifted_factorial",
    "to_big",
]

BigComplex = mpc

_LOG2_10 = 3.321928094887362


class Precision:
    """Numerical policy: working digits plus the derived tolerances.

    tail_eps and residual_tol default to 10^-(digits+10) and
    10^-(digits-15); singularity_gap defaults to 10^-3.  Any of the three
    can be overridden (pass a float or a decimal string), subject to
    tail_eps < residual_tol.
    """

    __slots__ = ("digits", "max_terms", "_tail", "_residual", "_gap")

    def __init__(self, digits=50, max_terms=10000, tail_eps=None,
                 residual_tol=None, singularity_gap=None):
        if digits < 20:
            raise ValueError("digits must be at least 20")
        if max_terms < 1:
            raise ValueError("max_terms must be positive")
        self.digits = int(digits)
        self.max_terms = int(max_terms)
        self._tail = tail_eps
        self._residual = residual_tol
        self._gap = singularity_gap
        with active(self):
            if not self.tail_eps < self.residual_tol:
                raise ValueError("tail_eps must be smaller than residual_tol")

    @property
    def bits(self):
        return int(_LOG2_10 * (self.digits + 10)) + 24

    @property
    def tail_eps(self):
        if self._tail is None:
            return mpfr(10) ** (-(self.digits + 10))
        return mpfr(self._tail)

    @property
    def residual_tol(self):
        if self._residual is None:
            return mpfr(10) ** (-(self.digits - 15))
        return mpfr(self._residual)

    @property
    def singularity_gap(self):
        if self._gap is None:
            return mpfr("1e-3")
        return mpfr(self._gap)

    def replace(self, **kw):
        args = dict(digits=self.digits, max_terms=self.max_terms,
                    tail_eps=self._tail, residual_tol=self._residual,
                    singularity_gap=self._gap)
        args.update(kw)
        return Precision(**args)

    def context(self):
        return gmpy2.context(precision=self.bits, allow_complex=True)

    def __repr__(self):
        return f"Precision(digits={self.digits}, max_terms={self.max_terms})"

    def __eq__(self, other):
        return (isinstance(other, Precision)
                and self.digits == other.digits
                and self.max_terms == other.max_terms
                and self._tail == other._tail
                and self._residual == other._residual
                and self._gap == other._gap)

    def __hash__(self):
        return hash((self.digits, self.max_terms))


@contextlib.contextmanager
def active(prec):
    """Run a block under the gmpy2 context derived from prec."""
    old = gmpy2.get_context()
    gmpy2.set_context(prec.context())
    try:
        yield prec
    finally:
        gmpy2.set_context(old)


def to_big(x):
    """Coerce x to BigComplex under the active context."""
    if isinstance(x, mpc):
        return +x
    if isinstance(x, Fraction):
        return mpc(mpfr(x.numerator) / mpfr(x.denominator))
    return mpc(x)


def is_near(x, y, gap):
    """Relative proximity test |x - y| <= gap * |y|."""
    return abs(x - y) <= gap * abs(y)


@dataclasses.dataclass(frozen=True)
class SeriesValue:
    """A computed sum/product with its truncation-error estimate."""

    value: BigComplex
    err_bound: object  # mpfr magnitude
    terms_used: int
    terminating: bool

    def __complex__(self):
        return complex(self.value)


def _check_base(q):
    if q == 0 or abs(q) >= 1:
        raise BadBase(f"base must satisfy 0 < |q| < 1, got {q}")


def qpoch(a, q, n, prec):
    """q-shifted factorial (a; q)_n for any integer n.

    Empty product at n = 0; a plain product for n > 0; the reciprocal
    convention (a; q)_-n = 1 / (a q^-n; q)_n for n < 0.  Raises
    SingularFactor when any factor falls inside the singularity gap.
    """
    with active(prec):
        a = to_big(a)
        q = to_big(q)
        n = int(n)
        if n == 0:
            return mpc(1)
        gap = prec.singularity_gap
        if n > 0:
            value, minfac = kernels.qpoch_finite(a, q, n)
            if minfac >= 0 and minfac < gap:
                raise SingularFactor(f"({a}; q)_{n} has a factor within the gap")
            return value
        if q == 0:
            raise BadBase("q = 0 admits no negative-order shifted factorial")
        b = a * q ** n
        value, minfac = kernels.qpoch_finite(b, q, -n)
        if minfac < gap:
            raise SingularFactor(f"({a}; q)_{n} divides by a factor within the gap")
        return 1 / value


def _qpoch_inf_scan(a, q, prec):
    """Internal: (a; q)_infinity plus the smallest |factor| seen."""
    with active(prec):
        a = to_big(a)
        q = to_big(q)
        _check_base(q)
        value, rel, j, minfac = kernels.qpoch_inf(a, q, prec.tail_eps,
                                                  prec.max_terms)
        sv = SeriesValue(value=value, err_bound=rel * abs(value),
                         terms_used=j, terminating=False)
        return sv, minfac


def qpoch_inf(a, q, prec):
    """Infinite q-shifted factorial (a; q)_infinity for |q| < 1."""
    sv, _ = _qpoch_inf_scan(a, q, prec)
    return sv


def qpoch_multi(values, q, n, prec):
    """Product of (a_i; q)_n over a parameter list; n is an int or "inf"."""
    if not values:
        raise ValueError("qpoch_multi needs a nonempty parameter list")
    with active(prec):
        if n == "inf" or n is None:
            total = mpc(1)
            err = mpfr(0)
            terms = 0
            for a in values:
                sv = qpoch_inf(a, q, prec)
                err = err * abs(sv.value) + sv.err_bound * abs(total)
                total = total * sv.value
                terms = max(terms, sv.terms_used)
            return SeriesValue(value=total, err_bound=err,
                               terms_used=terms, terminating=False)
        total = mpc(1)
        for a in values:
            total = total * qpoch(a, q, n, prec)
        return total


def shifted_factorial(a, n):
    """Ordinary rising factorial (a)_n, exact on Fraction/int inputs.

    (a)_-n = 1 / (a - n)_n for n < 0.
    """
    n = int(n)
    if n >= 0:
        prod = a * 0 + 1
        x = a
        for _ in range(n):
            prod = prod * x
            x = x + 1
        return prod
    denom = shifted_factorial(a - (-n), -n)
    if denom == 0:
        raise SingularFactor(f"({a})_{n} divides by zero")
    return 1 / denom
