"""Basic hypergeometric series: r_phi_s, very-well-poised wrappers and the
two-term completed combination Phi.

Conventions.  r_phi_s(upper, lower, q, z) sums

    sum_n  prod(upper)_n / (prod(lower)_n (q)_n) * [(-1)^n q^C(n,2)]^(1+s-r) z^n

so series with r <= s+1 behave as usual (argument radius 1 when r = s+1,
entire when r < s+1).  w10_9(a; p1..p7) is the very-well-poised series with
argument q; its parameters must satisfy the balance p1...p7 = a^3 q^2.
w8_7(a; p1..p5; z) takes a free argument.  phi_pair adds to w10_9 the
complementary series attached to one distinguished parameter; the result
does not depend on which of the seven is distinguished, and the complement
vanishes when any non-distinguished parameter equals 1.
"""

from __future__ import annotations

import dataclasses
import math

import gmpy2
from gmpy2 import mpc, mpfr

from ._backend import kernels
from .errors import (
    BadBase,
    BalanceViolation,
    DistinguishedEqualsA,
    Diverged,
    NonTerminating,
    OutsideConvergence,
    SingularFactor,
)
from .qnum import (
    Precision,
    SeriesValue,
    _qpoch_inf_scan,
    active,
    shifted_factorial,
    to_big,
)

__all__ = [
    "DIST_SLOTS",
    "WpParams",
    "orbit_clear",
    "phi_clear",
    "phi_pair",
    "r_phi_s",
    "rFs_ordinary",
    "series_clear",
    "terminating_order",
    "w8_7",
    "w10_9",
]

# valid DistinguishedChoice values: slot i selects params7()[i-1]
DIST_SLOTS = (1, 2, 3, 4, 5, 6, 7)


def terminating_order(u, q, gap, max_terms):
    """Smallest N in 0..max_terms with u = q^-N within relative gap, else None."""
    au = abs(u)
    if au == 0:
        return None
    aq = abs(q)
    est = -gmpy2.log(au) / gmpy2.log(aq)
    try:
        n0 = int(round(float(est)))
    except (OverflowError, ValueError):
        return None
    for n in (n0 - 1, n0, n0 + 1):
        if 0 <= n <= max_terms and abs(u - q ** (-n)) <= gap * aq ** (-n):
            return n
    return None


def _check_base(q):
    if q == 0 or abs(q) >= 1:
        raise BadBase(f"base must satisfy 0 < |q| < 1, got {q}")


def r_phi_s(upper, lower, q, z, prec):
    """Evaluate the general series with termination detection.

    Any upper parameter equal to q^-N (within the relative singularity gap)
    terminates the sum after N+1 terms, which is then exact to rounding.
    Non-terminating sums stop after three consecutive terms below
    tail_eps * max(1, |partial|).
    """
    with active(prec):
        upper = [to_big(u) for u in upper]
        lower = [to_big(l) for l in lower]
        q = to_big(q)
        z = to_big(z)
        _check_base(q)
        if z == 0:
            return SeriesValue(value=mpc(1), err_bound=mpfr(0),
                               terms_used=1, terminating=True)
        excess = 1 + len(lower) - len(upper)
        gap = prec.singularity_gap
        orders = [terminating_order(u, q, gap, prec.max_terms) for u in upper]
        orders = [n for n in orders if n is not None]
        n_stop = min(orders) if orders else -1
        if n_stop < 0:
            if excess < 0:
                raise Diverged("series with r > s+1 diverges unless terminating")
            if excess == 0 and abs(z) >= 1:
                raise OutsideConvergence(f"|z| = {abs(z)} >= 1 with r = s+1")
        total, err, nterms, terminated = kernels.series_sum(
            upper, lower + [q], q, z, excess, prec.tail_eps, gap,
            prec.max_terms, n_stop)
        return SeriesValue(value=mpc(total), err_bound=mpfr(err),
                           terms_used=nterms, terminating=terminated)


def _vwp_lists(a, params, q):
    """Very-well-poised upper/lower lists for base a and the given parameters."""
    r = gmpy2.sqrt(a)
    upper = [a, q * r, -q * r, *params]
    lower = [r, -r] + [a * q / p for p in params]
    return upper, lower


def w10_9(a, params, q, prec, branch=1):
    """Balanced very-well-poised 10-phi-9 with argument q.

    params is the 7-tuple (p1..p7) with p1...p7 = a^3 q^2 (checked to
    residual_tol).  branch selects the square-root branch used for the
    well-poised pair; the sum is branch-independent, which tests assert.
    """
    with active(prec):
        a = to_big(a)
        q = to_big(q)
        params = [to_big(p) for p in params]
        if len(params) != 7:
            raise ValueError("w10_9 takes exactly 7 parameters")
        target = a ** 3 * q ** 2
        prod = mpc(1)
        for p in params:
            prod = prod * p
        if abs(prod - target) > prec.residual_tol * abs(target):
            raise BalanceViolation(
                f"balance defect {abs(prod - target) / abs(target)}")
        upper, lower = _vwp_lists(a, params, q)
        if branch == -1:
            upper[1], upper[2] = upper[2], upper[1]
            lower[0], lower[1] = lower[1], lower[0]
        return r_phi_s(upper, lower, q, q, prec)


def w8_7(a, params, q, z, prec):
    """Very-well-poised 8-phi-7 with free argument z; params is a 5-tuple."""
    with active(prec):
        a = to_big(a)
        q = to_big(q)
        z = to_big(z)
        params = [to_big(p) for p in params]
        if len(params) != 5:
            raise ValueError("w8_7 takes exactly 5 parameters")
        upper, lower = _vwp_lists(a, params, q)
        return r_phi_s(upper, lower, q, z, prec)


@dataclasses.dataclass(frozen=True)
class WpParams:
    """Eight-parameter tuple (a; b,c,d,e,f,g,h) with base q.

    Values are stored as given; use make() to normalize scalars under the
    working precision.  s is the derived quantity a^3 q^3 / (bcdef).
    """

    a: mpc
    b: mpc
    c: mpc
    d: mpc
    e: mpc
    f: mpc
    g: mpc
    h: mpc
    q: mpc

    NAMES = ("a", "b", "c", "d", "e", "f", "g", "h")

    @classmethod
    def make(cls, a, b, c, d, e, f, g, h, q, prec):
        with active(prec):
            return cls(*[to_big(x) for x in (a, b, c, d, e, f, g, h, q)])

    @classmethod
    def from_balance(cls, a, b, c, d, e, f, g, q, prec):
        """Fill the last slot from the balance constraint."""
        with active(prec):
            vals = [to_big(x) for x in (a, b, c, d, e, f, g)]
            q = to_big(q)
            a_ = vals[0]
            rest = vals[1:]
            prod = mpc(1)
            for p in rest:
                prod = prod * p
            h = a_ ** 3 * q ** 2 / prod
            return cls(*vals, h, q)

    @property
    def s(self):
        return self.a ** 3 * self.q ** 3 / (self.b * self.c * self.d
                                            * self.e * self.f)

    def params7(self):
        return (self.b, self.c, self.d, self.e, self.f, self.g, self.h)

    def balance_defect(self):
        target = self.a ** 3 * self.q ** 2
        prod = mpc(1)
        for p in self.params7():
            prod = prod * p
        return abs(prod - target) / abs(target)

    def shifted(self, **pows):
        """Return a copy with named parameters multiplied by q^k.

        Keys are parameter names a..h, values integer exponents, e.g.
        shifted(a=2, b=1) multiplies a by q^2 and b by q.
        """
        vals = {}
        for name in self.NAMES:
            k = pows.pop(name, 0)
            v = getattr(self, name)
            vals[name] = v * self.q ** k if k else v
        if pows:
            raise ValueError(f"unknown parameters {sorted(pows)}")
        return WpParams(q=self.q, **vals)

    def replace(self, **vals):
        args = {name: getattr(self, name) for name in self.NAMES}
        args["q"] = self.q
        args.update(vals)
        return WpParams(**args)


def _check_dist(dist):
    if dist not in DIST_SLOTS:
        raise ValueError(f"distinguished slot must be 1..7, got {dist}")


def _prod_inf(args, q, prec, denominator=False):
    """Product of (x; q)_inf over args; returns (value, rel_err).

    In denominator position any factor inside the singularity gap raises,
    since the product is about to be divided by.
    """
    total = mpc(1)
    rel = mpfr(0)
    gap = prec.singularity_gap
    for x in args:
        sv, minfac = _qpoch_inf_scan(x, q, prec)
        if denominator and minfac >= 0 and minfac < gap:
            raise SingularFactor(
                f"denominator product ({x}; q)_inf has a factor within the gap")
        total = total * sv.value
        av = abs(sv.value)
        rel = rel + (sv.err_bound / av if av > 0 else sv.err_bound)
    return total, rel


def orbit_clear(x, q, tol, max_steps=512):
    """True when no point of x, xq, xq^2, ... lies within tol of 1.

    Guards two distinct hazards with one scan: a lower parameter whose
    q-orbit hits 1 is a series pole, and an upper parameter within the
    relative gap of q^-n trips termination detection, since
    |x - q^-n| <= tol q^-n is |x q^n - 1| <= tol for real positive q.
    """
    ax = abs(x)
    aq = abs(q)
    step = 0
    while ax > 0.5 and step < max_steps:
        if abs(1 - x) < tol:
            return False
        x = x * q
        ax = ax * aq
        step += 1
    return True


def series_clear(a, params, q, tol):
    """Margin checks for every parameter orbit of one well-poised series."""
    r = gmpy2.sqrt(a)
    for u in (a, q * r, -q * r, *params):
        if not orbit_clear(u, q, tol):
            return False
    for l in (r, -r, *[a * q / p for p in params]):
        if not orbit_clear(l, q, tol):
            return False
    return True


def phi_clear(wp, tol, slots=DIST_SLOTS):
    """Whether phi_pair stays clear of the gap for the given slots at wp."""
    a, q = wp.a, wp.q
    p7 = wp.params7()
    if not series_clear(a, p7, q, tol):
        return False
    for k in slots:
        beta = p7[k - 1]
        others = [p for i, p in enumerate(p7) if i != k - 1]
        if abs(beta - a) <= tol * abs(a):
            return False
        # keep clear of the complement-vanishing rule as well
        if any(abs(1 - o) <= tol for o in others):
            return False
        num_args = [a * q, beta / a, *others, *[beta * q / o for o in others]]
        den_args = [beta ** 2 * q / a, a / beta,
                    *[a * q / o for o in others],
                    *[beta * o / a for o in others]]
        for x in (*num_args, *den_args):
            if not orbit_clear(x, q, tol):
                return False
        if not series_clear(beta ** 2 / a,
                            (beta, *[beta * o / a for o in others]),
                            q, tol):
            return False
    return True


def rFs_ordinary(upper, lower, z):
    """Terminating ordinary hypergeometric sum, exact on rational inputs.

    Some upper parameter must be a nonpositive integer; the sum then has
    N+1 terms built from rising factorials, with no base q involved.
    """
    stops = []
    for u in upper:
        try:
            iu = int(u)
        except (TypeError, ValueError, OverflowError):
            continue
        if u == iu and iu <= 0:
            stops.append(-iu)
    if not stops:
        raise NonTerminating("no nonpositive-integer upper parameter")
    N = min(stops)
    total = z * 0 + 1
    for n in range(1, N + 1):
        num = z * 0 + 1
        for u in upper:
            num = num * shifted_factorial(u, n)
        den = math.factorial(n)
        for l in lower:
            den = den * shifted_factorial(l, n)
        if den == 0:
            raise SingularFactor(f"lower parameter pole at term {n}")
        total = total + num * z ** n / den
    return total


def phi_pair(wp, dist, prec):
    """The completed combination phi + phi' for one distinguished slot.

    wp must be balanced to residual_tol.  dist (1..7) selects which of the
    seven parameters carries the complementary series; the value is the
    same for every admissible choice.  The complement vanishes exactly when
    some non-distinguished parameter equals 1 (within the gap).
    """
    _check_dist(dist)
    with active(prec):
        defect = wp.balance_defect()
        if defect > prec.residual_tol:
            raise BalanceViolation(f"balance defect {defect}")
        a, q = wp.a, wp.q
        p7 = wp.params7()
        beta = p7[dist - 1]
        others = [p for i, p in enumerate(p7) if i != dist - 1]
        gap = prec.singularity_gap
        if abs(beta - a) <= gap * abs(a):
            raise DistinguishedEqualsA(
                "distinguished parameter must differ from the base parameter")
        base = w10_9(a, p7, q, prec)
        if any(abs(o - 1) <= gap for o in others):
            return base
        num_args = [a * q, beta / a, *others, *[beta * q / o for o in others]]
        den_args = [beta ** 2 * q / a, a / beta,
                    *[a * q / o for o in others],
                    *[beta * o / a for o in others]]
        num, num_rel = _prod_inf(num_args, q, prec)
        den, den_rel = _prod_inf(den_args, q, prec, denominator=True)
        pref = num / den
        comp = w10_9(beta ** 2 / a, (beta, *[beta * o / a for o in others]),
                     q, prec)
        value = base.value + pref * comp.value
        err = (base.err_bound + abs(pref) * comp.err_bound
               + abs(pref * comp.value) * (num_rel + den_rel))
        return SeriesValue(value=value, err_bound=err,
                           terms_used=max(base.terms_used, comp.terms_used),
                           terminating=base.terminating and comp.terminating)
