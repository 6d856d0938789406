"""Continued fractions attached to the three-term recurrence.

The fraction is 1/a_0 - b_1/a_1 - b_2/a_2 - ... in the descending-bar
sense.  Convergents come from the standard numerator/denominator
recursion with per-step rescaling.  The closed-form value is the
minimal-solution ratio; three right-hand sides are implemented: the
general explicit display (pincherle_rhs), its h = 1 specialization
(corollary32_rhs), and the terminating h = 1 case (corollary33_rhs),
each transcribed exactly as printed.
"""

from __future__ import annotations

import dataclasses

import gmpy2
from gmpy2 import mpc, mpfr

from .errors import DenominatorBracketZero, NotTerminating, SamplerExhausted
from .qnum import active, qpoch_inf, to_big
from .series import WpParams, orbit_clear, phi_pair, terminating_order, w10_9
from .recurrence import (
    RecurrenceSystem,
    _system_clear,
    coeffs,
    minimal_solution,
    w1_w2,
)

__all__ = [
    "ContinuedFraction",
    "ConvergentTrace",
    "convergents",
    "corollary32_near_termination",
    "corollary32_rhs",
    "corollary33_rhs",
    "entry40_system",
    "is_entry40",
    "minimal_ratio",
    "pincherle_rhs",
    "recurrence_fraction",
    "sample_terminating_systems",
    "terminating_level",
]


@dataclasses.dataclass(frozen=True)
class ContinuedFraction:
    """partial_den(n) = a_n for n >= 0, partial_num(n) = b_n for n >= 1;
    length None means unbounded, N means the last level is b_N/a_N."""

    partial_num: object
    partial_den: object
    length: int = None


@dataclasses.dataclass(frozen=True)
class ConvergentTrace:
    values: tuple
    deltas: tuple
    poles: tuple

    def last(self):
        return self.values[-1]


def convergents(cf, K, prec):
    """First K+1 convergents (levels 0..K) of cf.

    A vanishing denominator at some level is flagged in poles and the
    value recorded as an infinity marker; iteration continues.
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    if cf.length is not None and K > cf.length:
        raise ValueError(f"finite fraction has {cf.length + 1} levels, "
                         f"K={K} out of range")
    with active(prec):
        inf = mpc(mpfr("inf"), mpfr(0))
        a0 = to_big(cf.partial_den(0))
        num_prev, num = mpc(0), mpc(1)
        den_prev, den = mpc(1), a0
        values = []
        poles = []
        if den == 0:
            poles.append(0)
            values.append(inf)
        else:
            values.append(num / den)
        for n in range(1, K + 1):
            a_n = to_big(cf.partial_den(n))
            b_n = to_big(cf.partial_num(n))
            num, num_prev = a_n * num - b_n * num_prev, num
            den, den_prev = a_n * den - b_n * den_prev, den
            scale = max(abs(num), abs(den), abs(num_prev), abs(den_prev))
            if scale > 0:
                num, num_prev = num / scale, num_prev / scale
                den, den_prev = den / scale, den_prev / scale
            if den == 0:
                poles.append(n)
                values.append(inf)
            else:
                values.append(num / den)
        deltas = tuple(values[k + 1] - values[k] for k in range(len(values) - 1))
        return ConvergentTrace(values=tuple(values), deltas=deltas,
                               poles=tuple(poles))


def recurrence_fraction(sys, prec, length=None):
    """The fraction 1/a_0 - b_1/a_1 - ... built from sys's coefficients."""
    def den(n):
        return coeffs(sys, n, prec)[0]

    def num(n):
        return coeffs(sys, n, prec)[1]

    return ContinuedFraction(partial_num=num, partial_den=den, length=length)


def minimal_ratio(sys, prec):
    """X_0^(min) / (b_0 X_{-1}^(min)): the fraction value by minimality."""
    with active(prec):
        w = w1_w2(sys, prec)
        x0 = minimal_solution(sys, 0, prec, _w=w).value
        xm1 = minimal_solution(sys, -1, prec, _w=w).value
        b0 = coeffs(sys, 0, prec)[1]
        return x0 / (b0 * xm1)


def _prod_ratio(num, den, q, prec):
    val = mpc(1)
    for x in num:
        val = val * qpoch_inf(x, q, prec).value
    for y in den:
        val = val / qpoch_inf(y, q, prec).value
    return val


def pincherle_rhs(sys, prec):
    """Explicit closed form of the fraction for generic h.

    Numerator bracket: W2 P1 Phi(a; b..f, s/(hq), h | slot 6)
    - W1 P2 Phi(q/a; q/b..q/f, hq^2/s, q/h | slot 7); denominator
    bracket likewise at the n = -1 parameter tuples with the printed
    linear-factor products, all times (1-s/(h^2 q))(1-s/(h^2 q^2))/q.
    """
    with active(prec):
        a, b, c, d, e, f, h, q = (sys.a, sys.b, sys.c, sys.d, sys.e,
                                  sys.f, sys.h, sys.q)
        s = sys.s
        over = (b, c, d, e, f)
        w1, w2 = w1_w2(sys, prec)

        p1 = _prod_ratio(
            (a * q / h,),
            (s / (h * q), s / (a * h * q),
             *[a * q / (x * h) for x in over]),
            q, prec)
        phi1 = phi_pair(WpParams.make(
            a, b, c, d, e, f, s / (h * q), h, q, prec), 6, prec)
        p2 = _prod_ratio(
            (s / (a * h),),
            (q / h, a / h, *[x * s / (a * h * q) for x in over]),
            q, prec)
        phi2 = phi_pair(WpParams.make(
            q / a, q / b, q / c, q / d, q / e, q / f, h * q ** 2 / s,
            q / h, q, prec), 7, prec)
        num = w2.value * p1 * phi1.value - w1.value * p2 * phi2.value

        q1 = (1 - 1 / h)
        for x in over:
            q1 = q1 * (1 - x * s / (a * h * q ** 2))
        q1 = q1 * _prod_ratio(
            (a / h,),
            (s / (h * q), s / (a * h * q ** 2),
             *[a * q / (x * h) for x in over]),
            q, prec)
        phi3 = phi_pair(WpParams.make(
            a, b, c, d, e, f, s / (h * q ** 2), h * q, q, prec), 6, prec)
        q2 = (1 - s / (h * q ** 2))
        for x in over:
            q2 = q2 * (1 - a / (x * h))
        q2 = q2 * _prod_ratio(
            (s / (a * h * q),),
            (q / h, a / (q * h), *[x * s / (a * q * h) for x in over]),
            q, prec)
        phi4 = phi_pair(WpParams.make(
            q / a, q / b, q / c, q / d, q / e, q / f, h * q ** 3 / s,
            1 / h, q, prec), 7, prec)
        den = w2.value * q1 * phi3.value - w1.value * q2 * phi4.value

        den_peak = max(abs(w2.value * q1 * phi3.value),
                       abs(w1.value * q2 * phi4.value))
        noise = (abs(w2.value * q1) * phi3.err_bound
                 + abs(w1.value * q2) * phi4.err_bound
                 + den_peak * (w1.err_bound / max(abs(w1.value), mpfr(1))
                               + w2.err_bound / max(abs(w2.value), mpfr(1))))
        if den == 0 or abs(den) <= noise:
            raise DenominatorBracketZero(
                f"denominator bracket {den} below its error bound {noise}")
        pref = (1 - s / (h ** 2 * q)) * (1 - s / (h ** 2 * q ** 2)) / q
        return pref * num / den


def _pi_n(sys, n, prec):
    a, b, c, d, e, f, q = (sys.a, sys.b, sys.c, sys.d, sys.e, sys.f, sys.q)
    s = sys.s
    over = (b, c, d, e, f)
    num = (q ** 2 / a, *[q / x for x in over], q ** (3 - n) / s,
           a * q ** (n - 1), s * q ** (2 * n - 2),
           *[x * q ** n for x in over])
    den = (a * q ** (2 * n), q ** (1 - n) / a,
           *[x * q / a for x in over], a * q ** 2 / s,
           s * q ** (n - 1) / a, *[a * q ** n / x for x in over])
    return _prod_ratio(num, den, q, prec)


def corollary32_rhs(sys, prec):
    """h = 1 closed form of the fraction value."""
    with active(prec):
        a, b, c, d, e, f, h, q = (sys.a, sys.b, sys.c, sys.d, sys.e,
                                  sys.f, sys.h, sys.q)
        if h != 1:
            raise ValueError("h = 1 required")
        s = sys.s
        over = (b, c, d, e, f)
        w1, w2 = w1_w2(sys, prec)
        t1 = w10_9(q / a, (q, q ** 2 / s, q / b, q / c, q / d, q / e,
                           q / f), q, prec)
        t2 = w10_9(a * q, (q, a * q ** 2 / s, a * q / b, a * q / c,
                           a * q / d, a * q / e, a * q / f), q, prec)
        t3 = _prod_ratio(
            (q, a, a * q, *[x * s / (a * q) for x in over]),
            (s / q, s / a, s / (a * q), *[a * q / x for x in over]),
            q, prec)
        pi0 = _pi_n(sys, 0, prec)
        pi1 = _pi_n(sys, 1, prec)
        pref = (1 - s / q) * (1 - a / q) / (q * (1 - s / (a * q)))
        for x in over:
            pref = pref / (1 - a / x)
        bracket = t1.value + pi1 * t2.value - t3 * w2.value / w1.value
        return pref * bracket / (1 + pi0)


def terminating_level(sys, prec):
    """(N, letter) with aq/letter = q^-N exactly, else NotTerminating."""
    with active(prec):
        a, q = sys.a, sys.q
        for letter in ("b", "c", "d", "e", "f"):
            x = getattr(sys, letter)
            n = terminating_order(a * q / x, q, prec.singularity_gap,
                                  prec.max_terms)
            if n is not None:
                return n, letter
        raise NotTerminating(
            "none of aq/b..aq/f lies on the inverse q-power lattice")


def corollary33_rhs(sys, prec):
    """Terminating h = 1 closed form (finite fraction of N+1 levels)."""
    with active(prec):
        a, b, c, d, e, f, h, q = (sys.a, sys.b, sys.c, sys.d, sys.e,
                                  sys.f, sys.h, sys.q)
        if h != 1:
            raise ValueError("h = 1 required")
        terminating_level(sys, prec)
        s = sys.s
        pref = (a * q / s) * (1 - a * q)
        for x in (b, c, d, e, f):
            pref = pref / (1 - x)
        w = w10_9(a * q, (q, a * q ** 2 / s, a * q / b, a * q / c,
                          a * q / d, a * q / e, a * q / f), q, prec)
        return pref * w.value


def corollary32_near_termination(sys, prec, delta="1e-10"):
    """h = 1 closed form evaluated just off a terminating configuration.

    When aq/x sits on the inverse q-power lattice the general h = 1
    display degenerates: the series under W1 develops a parameter pole
    at term N + 1 while the product multiplying W2/W1 loses a
    denominator factor, and only the combination has a limit (the
    terminating formula is that limit).  Detuning the lattice letter by
    1 + delta keeps every piece finite; the result approximates the
    terminating value to O(delta).  Evaluation runs at doubled digits
    with the singularity gap narrowed well below delta, since the gap
    guard would otherwise reject the intentionally near-lattice factor.
    """
    with active(prec):
        n, letter = terminating_level(sys, prec)
        step = to_big(delta).real
        pert = dataclasses.replace(
            sys, **{letter: getattr(sys, letter) * (1 + step)})
    inner = prec.replace(digits=2 * prec.digits,
                         singularity_gap=step * mpfr("1e-4"))
    return corollary32_rhs(pert, inner)


def is_entry40(sys, prec):
    """The s = q^2 configuration regressing to the classical fraction."""
    with active(prec):
        return bool(abs(sys.s - sys.q ** 2)
                    <= prec.singularity_gap * abs(sys.q ** 2))


def entry40_system(seed, prec, N=3):
    """A terminating h = 1 system with s = q^2 exactly.

    Draws a, b, c, d from the standard box, then sets
    e = a^2 q^-N/(bcd) and f = aq^{N+1}, which forces s = q^2.
    """
    import random
    rng = random.Random(f"entry40:{seed}")
    with active(prec):
        tol = 2 * prec.singularity_gap
        for _ in range(1000):
            q = mpfr(rng.uniform(0.3, 0.7))
            lnq = gmpy2.log(q)
            draws = [gmpy2.exp(mpc(rng.uniform(-1.5, 1.5) * lnq,
                                   rng.uniform(-0.5, 0.5) * lnq))
                     for _ in range(4)]
            a, b, c, d = draws
            e = a ** 2 * q ** (-N) / (b * c * d)
            f = a * q ** (N + 1)
            sys = RecurrenceSystem(a, b, c, d, e, f, mpc(1), q)
            if abs(e) > abs(q) ** (-3) or abs(e) < abs(q) ** 3:
                continue
            if _terminating_clear(sys, N, prec, tol):
                return sys
        raise SamplerExhausted("no admissible Entry-40 draw in 1000 tries")


def _terminating_clear(sys, N, prec, tol):
    if not _system_clear(sys, prec, 0, N, tol):
        return False
    # printed prefactor of the terminating form must stay away from 0
    for x in (sys.b, sys.c, sys.d, sys.e, sys.f):
        if abs(1 - x) < tol:
            return False
    # denominator factors of the terminating w10_9: aq/x on the lattice
    # only for the designated letter
    a, q = sys.a, sys.q
    hits = 0
    for x in (sys.b, sys.c, sys.d, sys.e, sys.f):
        if terminating_order(a * q / x, q, tol, prec.max_terms) is not None:
            hits += 1
    return hits == 1


def _corollary32_clear(sys, prec, tol):
    a, b, c, d, e, f, q = (sys.a, sys.b, sys.c, sys.d, sys.e, sys.f, sys.q)
    s = sys.s
    over = (b, c, d, e, f)
    hazards = [q / a, s / a, a * q, s, gmpy2.sqrt(q / a), -gmpy2.sqrt(q / a),
               gmpy2.sqrt(a * q), -gmpy2.sqrt(a * q),
               s / q, s / (a * q), a, a * q ** 2 / s]
    hazards += [x * q / a for x in over]
    hazards += [x * q for x in over]
    hazards += [a * q / x for x in over]
    hazards += [a * q ** n / x for x in over for n in (0, 1)]
    hazards += [s * q ** (n - 1) / a for n in (0, 1)]
    hazards += [q ** (1 - n) / a for n in (0, 1)]
    for x in hazards:
        if not orbit_clear(x, q, tol):
            return False
    for x in over:
        if abs(1 - a / x) < tol:
            return False
    return abs(1 - s / (a * q)) >= tol


def sample_h1_systems(seed, count, prec, label="h1cf"):
    """Seeded h = 1 systems in the annulus, clear for the h = 1 closed
    form, its convergents, and the generic form at h = 1 + epsilon."""
    import random
    rng = random.Random(f"{label}:{seed}")
    out = []
    rejections = 0
    with active(prec):
        tol = 2 * prec.singularity_gap
        zcap = mpfr("0.9")
        while len(out) < count:
            if rejections > 1000 * count:
                raise SamplerExhausted(
                    f"{label}: {rejections} rejections for "
                    f"{len(out)}/{count}")
            q = mpfr(rng.uniform(0.3, 0.7))
            lnq = gmpy2.log(q)
            draws = [gmpy2.exp(mpc(rng.uniform(-1.5, 1.5) * lnq,
                                   rng.uniform(-0.5, 0.5) * lnq))
                     for _ in range(6)]
            sys = RecurrenceSystem(*draws, mpc(1), q)
            ok = (abs(sys.s / (sys.a * q)) < zcap
                  and abs(sys.a * q ** 2 / sys.s) < zcap
                  and _system_clear(sys, prec, -1, 24, tol)
                  and _corollary32_clear(sys, prec, tol))
            if ok:
                out.append(sys)
            else:
                rejections += 1
    return out


def sample_terminating_systems(seed, count, prec, N_max=6, annulus=False,
                               label="term33"):
    """Seeded h = 1 terminating systems with f = aq^{N+1}, N <= N_max."""
    import random
    rng = random.Random(f"{label}:{seed}")
    out = []
    rejections = 0
    with active(prec):
        tol = 2 * prec.singularity_gap
        while len(out) < count:
            if rejections > 1000 * count:
                raise SamplerExhausted(
                    f"{label}: {rejections} rejections for "
                    f"{len(out)}/{count}")
            q = mpfr(rng.uniform(0.3, 0.7))
            lnq = gmpy2.log(q)
            N = rng.randrange(0, N_max + 1)
            draws = [gmpy2.exp(mpc(rng.uniform(-1.5, 1.5) * lnq,
                                   rng.uniform(-0.5, 0.5) * lnq))
                     for _ in range(5)]
            a, b, c, d, e = draws
            f = a * q ** (N + 1)
            sys = RecurrenceSystem(a, b, c, d, e, f, mpc(1), q)
            ok = _terminating_clear(sys, N, prec, tol)
            if ok and annulus:
                z1 = abs(sys.s / (a * q))
                z2 = abs(a * q ** 2 / sys.s)
                ok = z1 < mpfr("0.9") and z2 < mpfr("0.9")
            if ok:
                out.append((sys, N))
            else:
                rejections += 1
    return out
