"""The eight-parameter three-term recurrence and its solution catalog.

The difference equation is

    X_{n+1} - a_n X_n + b_n X_{n-1} = 0,    b_n = A_{n-1} B_n,

with coefficients built from (a, b, c, d, e, f, h, q) and the derived
s = a^3 q^3 / (bcdef).  Eight closed-form solution families are known,
each a prefactor (a power of s/(aq) or aq^2/s times a ratio of infinite
q-shifted factorials) multiplying a completed pair Phi at an n-dependent
parameter tuple; the distinguished-parameter freedom inside Phi turns each
family into several pairwise independent solutions, minus a handful of
printed aliases.  Families 7 and 8 admit b<->{c,d,e,f} interchanges; which
of those are genuinely new is decided numerically (alias_scan), not taken
on faith.

The reflection substitution (q/a, ..., q/f, q^{2n+1}/h) maps the
coefficient pair onto itself up to the printed renormalization; this is
checked numerically (reflection_check) in place of the degree-14
polynomial identity established elsewhere by computer algebra.
"""

from __future__ import annotations

import dataclasses
import random

import gmpy2
from gmpy2 import mpc, mpfr

from .errors import AliasRejected, SamplerExhausted, SingularFactor
from .qnum import Precision, SeriesValue, active, to_big
from .series import (
    WpParams,
    orbit_clear,
    phi_clear,
    phi_pair,
    series_clear,
    w8_7,
)

__all__ = [
    "RecurrenceSystem",
    "SolutionId",
    "all_solution_ids",
    "alias_scan",
    "asymptote_check",
    "casorati",
    "coeffs",
    "family_value",
    "minimal_solution",
    "reflection_check",
    "residual_check",
    "sample_systems",
    "solution_eval",
    "w1_w2",
]

INTERCHANGE_LETTERS = ("c", "d", "e", "f")


@dataclasses.dataclass(frozen=True)
class RecurrenceSystem:
    """Parameter set (a,b,c,d,e,f,h) with base q; s is derived."""

    a: mpc
    b: mpc
    c: mpc
    d: mpc
    e: mpc
    f: mpc
    h: mpc
    q: mpc

    NAMES = ("a", "b", "c", "d", "e", "f", "h")

    @classmethod
    def make(cls, a, b, c, d, e, f, h, q, prec):
        with active(prec):
            return cls(*[to_big(x) for x in (a, b, c, d, e, f, h, q)])

    @property
    def s(self):
        return self.a ** 3 * self.q ** 3 / (self.b * self.c * self.d
                                            * self.e * self.f)

    def swapped(self, letter):
        """Interchange b with one of c, d, e, f."""
        if letter not in INTERCHANGE_LETTERS:
            raise ValueError(f"interchange must be one of c,d,e,f, got {letter}")
        vals = {name: getattr(self, name) for name in self.NAMES}
        vals["b"], vals[letter] = vals[letter], vals["b"]
        return RecurrenceSystem(q=self.q, **vals)

    def reflected(self, n):
        """The substitution sending the recurrence onto itself at index n."""
        q = self.q
        return RecurrenceSystem(
            a=q / self.a, b=q / self.b, c=q / self.c, d=q / self.d,
            e=q / self.e, f=q / self.f, h=q ** (2 * n + 1) / self.h, q=q)


def _coeff_parts(sys, n):
    """Numerator/denominator factor arguments of A_n, B_n and the extra
    a_n term; factors are (1 - arg)."""
    a, b, c, d, e, f, h, q = (sys.a, sys.b, sys.c, sys.d,
                              sys.e, sys.f, sys.h, sys.q)
    s = sys.s
    over = (b, c, d, e, f)
    A_num = (s * q ** (n - 1) / h, s * q ** (n - 1) / (a * h),
             *[a * q ** (n + 1) / (x * h) for x in over])
    A_den = (s * q ** (2 * n) / h ** 2, s * q ** (2 * n - 1) / h ** 2,
             a * q ** (n + 1) / h)
    B_num = (q ** n / h, a * q ** n / h,
             *[x * s * q ** (n - 2) / (a * h) for x in over])
    B_den = (s * q ** (2 * n - 1) / h ** 2, s * q ** (2 * n - 2) / h ** 2,
             s * q ** (n - 2) / (a * h))
    T_num = (s / (a * q ** 2), b, c, d, e, f)
    T_den = (a * q ** (n + 1) / h, s * q ** (n - 2) / (a * h))
    T_mono = s * q ** (2 * n - 1) / (a * h ** 2)
    return ((mpc(1), A_num, A_den), (mpc(q), B_num, B_den),
            (T_mono, T_num, T_den))


def _ratio(mono, num, den, gap):
    # an exactly vanishing numerator factor wins over denominator
    # singularities: the lattice configurations behind the h = 1
    # corollaries (e.g. s = q^2 with h = 1, where B_0 is 0/0) are read
    # as limits inside the constrained family, which kills the term
    val = mono
    for x in num:
        fac = 1 - x
        if fac == 0:
            return mpc(0)
        val = val * fac
    for y in den:
        fac = 1 - y
        if abs(fac) < gap:
            raise SingularFactor(f"coefficient denominator factor {fac} "
                                 "inside the singularity gap")
        val = val / fac
    return val


def coeffs(sys, n, prec):
    """(a_n, b_n, A_n, B_n) of the recurrence at index n."""
    with active(prec):
        gap = prec.singularity_gap
        parts = _coeff_parts(sys, n)
        A_n, B_n, extra = (_ratio(m, num, den, gap) for m, num, den in parts)
        a_n = A_n + B_n + extra
        if B_n == 0:
            b_n = mpc(0)
        else:
            b_n = _ratio(*_coeff_parts(sys, n - 1)[0], gap) * B_n
        return a_n, b_n, A_n, B_n


def _family_form(sys, family, n):
    """(power_base, num_args, den_args, phi_a, phi_params) for one family.

    The solution value is power_base^n times the ratio of infinite
    q-shifted factorials over the listed arguments times the completed
    pair at (phi_a; phi_params).
    """
    a, b, c, d, e, f, h, q = (sys.a, sys.b, sys.c, sys.d,
                              sys.e, sys.f, sys.h, sys.q)
    s = sys.s
    over = (b, c, d, e, f)
    qn = q ** n
    if family == 1:
        return (mpc(1),
                (s * q ** (2 * n - 1) / h ** 2, a * qn * q / h),
                (s * qn / (h * q), s * qn / (a * h * q),
                 *[a * qn * q / (x * h) for x in over]),
                a,
                (b, c, d, e, f, s * qn / (h * q), h / qn))
    if family == 2:
        return (mpc(1),
                (s * q ** (2 * n - 1) / h ** 2, s * qn / (a * h)),
                (qn * q / h, a * qn / h,
                 *[x * s * qn / (a * h * q) for x in over]),
                q / a,
                (q / b, q / c, q / d, q / e, q / f,
                 h * q ** 2 / (s * qn), qn * q / h))
    if family == 3:
        return (s / (a * q),
                (s * qn / (a * h), s * q ** (2 * n) / h ** 2,
                 s * q ** (2 * n - 1) / h ** 2,
                 *[s * qn / (x * h) for x in over]),
                (s * qn / (h * q), qn * q / h,
                 s ** 2 * q ** (2 * n - 1) / (a * h ** 2),
                 *[a * qn * q / (x * h) for x in over],
                 *[x * s * qn / (a * h * q) for x in over]),
                s ** 2 * q ** (2 * n - 2) / (a * h ** 2),
                (s / (a * q), *[x * s * qn / (a * h * q) for x in over],
                 s * qn / (h * q)))
    if family == 4:
        return (a * q ** 2 / s,
                (s ** 2 * q ** (2 * n - 3) / (a * h ** 2),),
                (s * qn / (a * h * q),
                 *[s * qn / (x * h * q) for x in over]),
                a * h ** 2 * q ** 3 / (s ** 2 * q ** (2 * n)),
                (a * q ** 2 / s,
                 *[a * h * q ** 2 / (x * s * qn) for x in over],
                 h * q ** 2 / (s * qn)))
    if family == 5:
        return (a * q ** 2 / s,
                (s * q ** (2 * n - 1) / h ** 2, s * q ** (2 * n) / h ** 2,
                 a * qn * q / h, *[x * qn * q / h for x in over]),
                (a * q ** (2 * n + 2) / h ** 2, s * qn / (h * q),
                 qn * q / h,
                 *[x * s * qn / (a * h * q) for x in over],
                 *[a * qn * q / (x * h) for x in over]),
                a * q ** (2 * n + 1) / h ** 2,
                (a * q ** 2 / s, *[a * qn * q / (x * h) for x in over],
                 qn * q / h))
    if family == 6:
        return (s / (a * q),
                (a * q ** (2 * n) / h ** 2,),
                (a * qn / h, *[x * qn / h for x in over]),
                h ** 2 / (a * q ** (2 * n)),
                (s / (a * q), *[x * h / (a * qn) for x in over], h / qn))
    if family == 7:
        return (mpc(1),
                (s * q ** (2 * n - 1) / h ** 2, b * qn * q / h),
                (b * s * qn / (a * h * q), s * qn / (b * h * q),
                 qn * q / h,
                 *[a * qn * q / (x * h) for x in (c, d, e, f)]),
                b ** 2 / a,
                (b, b * c / a, b * d / a, b * e / a, b * f / a,
                 b * s * qn / (a * h * q), b * h / (a * qn)))
    if family == 8:
        # first numerator exponent is 2n-1, matching what the reflection
        # of family 7 actually produces; with 2n the form fails the
        # recurrence at every slot
        return (mpc(1),
                (s * q ** (2 * n - 1) / h ** 2, s * qn / (b * h)),
                (s * qn / (h * q), a * qn * q / (b * h), b * qn / h,
                 *[x * s * qn / (a * h * q) for x in (c, d, e, f)]),
                a * q / b ** 2,
                (q / b, a * q / (b * c), a * q / (b * d), a * q / (b * e),
                 a * q / (b * f), a * h * q ** 2 / (b * s * qn),
                 a * qn * q / (b * h)))
    raise ValueError(f"family must be 1..8, got {family}")


# distinguished slots excluded per family: printed constant-multiple aliases
_EXCLUDED_SLOTS = {
    1: (), 2: (), 3: (7,), 4: (7,), 5: (1, 7), 6: (1, 7),
    7: (1, 6, 7), 8: (1, 6, 7),
}


@dataclasses.dataclass(frozen=True)
class SolutionId:
    """family 1..8, distinguished slot 1..7, optional b<->letter swap."""

    family: int
    dist: int
    interchange: str = None

    def __post_init__(self):
        if self.family not in range(1, 9):
            raise ValueError(f"family must be 1..8, got {self.family}")
        if self.dist not in range(1, 8):
            raise ValueError(f"dist must be 1..7, got {self.dist}")
        if self.dist in _EXCLUDED_SLOTS[self.family]:
            raise AliasRejected(
                f"family {self.family} slot {self.dist} is a constant "
                "multiple of an earlier family")
        if self.interchange is not None:
            if self.family not in (7, 8):
                raise ValueError("interchange applies to families 7 and 8 only")
            if self.interchange not in INTERCHANGE_LETTERS:
                raise ValueError(
                    f"interchange must be one of c,d,e,f, got {self.interchange}")

    def label(self):
        tag = f"x{self.interchange}" if self.interchange else ""
        return f"X{self.family}{tag}.s{self.dist}"


def all_solution_ids(include_interchanges=True):
    ids = []
    for family in range(1, 9):
        for dist in range(1, 8):
            if dist in _EXCLUDED_SLOTS[family]:
                continue
            ids.append(SolutionId(family, dist))
            if include_interchanges and family in (7, 8):
                for letter in INTERCHANGE_LETTERS:
                    ids.append(SolutionId(family, dist, letter))
    return ids


def family_value(sys, family, dist, n, prec, interchange=None):
    """Raw closed-form evaluation, printed aliases included."""
    with active(prec):
        if interchange is not None:
            sys = sys.swapped(interchange)
        power, num, den, phi_a, phi_params = _family_form(sys, family, n)
        wp = WpParams.make(phi_a, *phi_params, sys.q, prec)
        phi = phi_pair(wp, dist, prec)
        pref = power ** n
        rel = mpfr(0)
        for x in num:
            val, r, _, minfac = _infprod(x, sys.q, prec)
            pref = pref * val
            rel += r
        for y in den:
            val, r, _, minfac = _infprod(y, sys.q, prec)
            if minfac >= 0 and minfac < prec.singularity_gap:
                raise SingularFactor(
                    f"prefactor denominator ({y}; q)_inf inside the gap")
            pref = pref / val
            rel += r
        value = pref * phi.value
        err = abs(pref) * phi.err_bound + abs(value) * rel
        return SeriesValue(value=value, err_bound=err,
                           terms_used=phi.terms_used,
                           terminating=phi.terminating)


def _infprod(x, q, prec):
    from .qnum import _qpoch_inf_scan
    sv, minfac = _qpoch_inf_scan(x, q, prec)
    av = abs(sv.value)
    rel = sv.err_bound / av if av > 0 else sv.err_bound
    return sv.value, rel, sv.terms_used, minfac


def solution_eval(sys, sol, n, prec):
    """Value of the solution identified by sol at index n."""
    return family_value(sys, sol.family, sol.dist, n, prec,
                        interchange=sol.interchange)


def residual_check(sys, sol, n_lo, n_hi, prec):
    """Max normalized three-term residual of sol over n in [n_lo, n_hi]."""
    if n_hi - n_lo < 2:
        raise ValueError("need n_hi - n_lo >= 2")
    with active(prec):
        xs = {n: solution_eval(sys, sol, n, prec).value
              for n in range(n_lo - 1, n_hi + 2)}
        worst = mpfr(0)
        for n in range(n_lo, n_hi + 1):
            a_n, b_n, _, _ = coeffs(sys, n, prec)
            t1, t2, t3 = xs[n + 1], -a_n * xs[n], b_n * xs[n - 1]
            scale = max(mpfr(1), abs(t1), abs(t2), abs(t3))
            worst = max(worst, abs(t1 + t2 + t3) / scale)
        return worst


def reflection_check(sys, n, prec):
    """Ratios of reflected to renormalized original coefficients.

    Both components must equal 1: a_n(reflected) against
    a_n h^2 q^{1-2n}/s and b_n(reflected) against b_{n+1} h^4 q^{-4n}/s^2.
    """
    with active(prec):
        h, q, s = sys.h, sys.q, sys.s
        refl = sys.reflected(n)
        ra, rb, _, _ = coeffs(refl, n, prec)
        a_n, _, _, _ = coeffs(sys, n, prec)
        _, b_next, _, _ = coeffs(sys, n + 1, prec)
        ratio_a = ra / (a_n * h ** 2 * q ** (1 - 2 * n) / s)
        ratio_b = rb / (b_next * h ** 4 * q ** (-4 * n) / s ** 2)
        return ratio_a, ratio_b


def casorati(sys, sol_i, sol_j, n, prec):
    """Discrete Wronskian X_n^{(i)} X_{n+1}^{(j)} - X_{n+1}^{(i)} X_n^{(j)}."""
    with active(prec):
        xi = solution_eval(sys, sol_i, n, prec).value
        xi1 = solution_eval(sys, sol_i, n + 1, prec).value
        xj = solution_eval(sys, sol_j, n, prec).value
        xj1 = solution_eval(sys, sol_j, n + 1, prec).value
        return xi * xj1 - xi1 * xj


def w1_w2(sys, prec):
    """The two limiting 8W7 values (free argument s/(aq), resp. aq^2/s)."""
    with active(prec):
        a, b, c, d, e, f, q = (sys.a, sys.b, sys.c, sys.d,
                               sys.e, sys.f, sys.q)
        s = sys.s
        w1 = w8_7(a, (b, c, d, e, f), q, s / (a * q), prec)
        w2 = w8_7(q / a, (q / b, q / c, q / d, q / e, q / f), q,
                  a * q ** 2 / s, prec)
        return w1, w2


def minimal_solution(sys, n, prec, _w=None):
    """W2 X_n^{(1),slot6} - W1 X_n^{(2),slot7}: the q^n-decaying solution."""
    with active(prec):
        w1, w2 = _w if _w is not None else w1_w2(sys, prec)
        x1 = family_value(sys, 1, 6, n, prec)
        x2 = family_value(sys, 2, 7, n, prec)
        value = w2.value * x1.value - w1.value * x2.value
        err = (abs(w2.value) * x1.err_bound + w2.err_bound * abs(x1.value)
               + abs(w1.value) * x2.err_bound + w1.err_bound * abs(x2.value))
        return SeriesValue(value=value, err_bound=err,
                           terms_used=max(x1.terms_used, x2.terms_used),
                           terminating=False)


def _x3_reference(sys, prec):
    """Closed-form large-n limit of the family-3 slot-2 solution."""
    a, b, c, d, e, f, q = (sys.a, sys.b, sys.c, sys.d,
                           sys.e, sys.f, sys.q)
    s, h = sys.s, sys.h
    num = (s / (a * q), b * q / c, b * q / d, b * q / e, b * q / f,
           b * q / a, b * h * q / s, s / (b * h))
    den = (b ** 2 * q / a, b * c / a, b * d / a, b * e / a, b * f / a,
           b, b * h / a, a * q / (b * h))
    pref = mpc(1)
    for x in num:
        pref = pref * _infprod(x, q, prec)[0]
    for y in den:
        pref = pref / _infprod(y, q, prec)[0]
    w = w8_7(b ** 2 / a, (b * c / a, b * d / a, b * e / a, b * f / a, b),
             q, s / (a * q), prec)
    return pref * w.value


ASYMPTOTE_IDS = ((1, 6), (2, 7), (3, 2))


def asymptote_check(sys, family, dist, prec, n_big=40):
    """(measured, reference) for the three families with printed limits."""
    with active(prec):
        measured = family_value(sys, family, dist, n_big, prec).value
        if (family, dist) == (1, 6):
            reference = w1_w2(sys, prec)[0].value
        elif (family, dist) == (2, 7):
            reference = w1_w2(sys, prec)[1].value
        elif (family, dist) == (3, 2):
            reference = _x3_reference(sys, prec)
        else:
            raise ValueError(f"no printed limit for family {family} "
                             f"slot {dist}")
        return measured, reference


def alias_scan(sys, prec, n0=1, tol=None):
    """Classify interchange variants of families 7/8 as new or aliased.

    Two solutions alias when their ratio is constant (and finite) over
    three consecutive n.  Returns (independent_ids, alias_pairs).
    """
    with active(prec):
        tol = mpfr(tol) if tol is not None else mpfr(10) ** (-prec.digits // 2)
        base = [s for s in all_solution_ids(include_interchanges=False)]
        cands = [s for s in all_solution_ids(include_interchanges=True)
                 if s.interchange is not None]
        vecs = {}
        for sol in base + cands:
            vecs[sol] = [solution_eval(sys, sol, n0 + k, prec).value
                         for k in range(3)]

        def aliases(u, v):
            ratios = [x / y for x, y in zip(vecs[u], vecs[v])]
            scale = max(abs(r) for r in ratios)
            return (abs(ratios[0] - ratios[1]) <= tol * scale
                    and abs(ratios[1] - ratios[2]) <= tol * scale)

        independent = list(base)
        alias_pairs = []
        for cand in cands:
            hit = next((ref for ref in independent if aliases(cand, ref)),
                       None)
            if hit is None:
                independent.append(cand)
            else:
                alias_pairs.append((cand, hit))
        return independent, alias_pairs


def _system_clear(sys, prec, n_lo, n_hi, tol):
    for n in range(n_lo, n_hi + 1):
        for _, num, den in _coeff_parts(sys, n):
            if any(1 - x == 0 for x in num):
                continue
            for y in den:
                if abs(1 - y) < tol:
                    return False
    return True


def _family_clear(sys, family, dist, n, tol, interchange=None):
    if interchange is not None:
        sys = sys.swapped(interchange)
    power, num, den, phi_a, phi_params = _family_form(sys, family, n)
    for x in (*num, *den):
        if not orbit_clear(x, sys.q, tol):
            return False
    wp = WpParams(a=phi_a, b=phi_params[0], c=phi_params[1],
                  d=phi_params[2], e=phi_params[3], f=phi_params[4],
                  g=phi_params[5], h=phi_params[6], q=sys.q)
    return phi_clear(wp, tol, slots=(dist,))


def sample_systems(seed, count, prec=None, *, n_lo=0, n_hi=6,
                   solutions=(), solutions_ns=None, annulus=False,
                   z_cap="0.9", reflect_ns=(), label="recurrence"):
    """Seeded rejection sampler over recurrence systems.

    Draws (a..f, h) as q^theta over the standard box and rejects draws
    whose coefficient denominators, requested solutions, or (optionally)
    the W1/W2 convergence arguments are out of bounds.  annulus=True keeps
    |s/(aq)| and |aq^2/s| both below z_cap, inside the minimal-solution
    annulus.  reflect_ns lists indices whose reflected-system coefficients
    must also stay clear of the gap; solutions_ns restricts the indices at
    which the requested solutions are screened (default: the full
    coefficient range).
    """
    prec = prec if prec is not None else Precision()
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = random.Random(f"{label}:{seed}")
    zcap = mpfr(z_cap)
    out = []
    rejections = 0
    with active(prec):
        tol = 2 * prec.singularity_gap
        while len(out) < count:
            if rejections > 1000 * count:
                raise SamplerExhausted(
                    f"{label}: {rejections} rejections for {len(out)}"
                    f"/{count} accepted draws")
            q = mpfr(rng.uniform(0.3, 0.7))
            lnq = gmpy2.log(q)
            vals = []
            for _ in range(7):
                re = rng.uniform(-1.5, 1.5)
                im = rng.uniform(-0.5, 0.5)
                vals.append(gmpy2.exp(mpc(re * lnq, im * lnq)))
            sys = RecurrenceSystem(*vals, q)
            ok = True
            if annulus:
                z1 = abs(sys.s / (sys.a * q))
                z2 = abs(sys.a * q ** 2 / sys.s)
                ok = z1 < zcap and z2 < zcap
            ok = ok and _system_clear(sys, prec, n_lo - 1, n_hi + 1, tol)
            if ok:
                for n in reflect_ns:
                    if not _system_clear(sys.reflected(n), prec,
                                         n - 1, n, tol):
                        ok = False
                        break
            if ok:
                sol_ns = (tuple(solutions_ns) if solutions_ns is not None
                          else tuple(range(n_lo - 1, n_hi + 2)))
                for sol in solutions:
                    for n in sol_ns:
                        if not _family_clear(sys, sol.family, sol.dist, n,
                                             tol, sol.interchange):
                            ok = False
                            break
                    if not ok:
                        break
            if ok:
                out.append(sys)
            else:
                rejections += 1
    return out
