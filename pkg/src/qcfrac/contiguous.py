"""Three-term contiguous relations for phi and its completed form Phi.

Each registered relation is a linear combination, with rational-function
coefficients, of series whose parameter tuples differ from the input by
integer powers of q.  Shift notation: "g+" multiplies g by q, "g-" divides
by q; a subscript +/- shifts a by q^2 and every one of b..h by q, so a
subscripted shift composed with one opposite single shift (for example
phi_+(g-)) preserves the balance constraint.

relation_residual evaluates every term and reports the normalized residual
|sum| / max(1, largest |term|), so near-cancellation is measured against
the scale of the arithmetic that produced it.  sample_admissible draws
parameter tuples from a seeded box and rejects any draw that puts a
coefficient factor, a series denominator, or a termination test inside the
singularity gap.
"""

from __future__ import annotations

import dataclasses
import enum
import random

import gmpy2
from gmpy2 import mpc, mpfr

from .errors import InadmissibleShift, SamplerExhausted
from .qnum import Precision, active, to_big
from .series import DIST_SLOTS, WpParams, phi_clear, phi_pair, series_clear, w10_9

__all__ = [
    "RelationId",
    "RelationReport",
    "relation_residual",
    "relation_terms",
    "sample_admissible",
]


class RelationId(enum.Enum):
    """The seven registered relations; the *p variants act on Phi."""

    L2_1 = "L2_1"
    L2_2 = "L2_2"
    L2_1p = "L2_1p"
    L2_2p = "L2_2p"
    T2_3 = "T2_3"
    T2_4 = "T2_4"
    T2_5 = "T2_5"


# relations stated for the completed combination Phi; the rest use plain phi
PHI_RELATIONS = frozenset({
    RelationId.L2_1p, RelationId.L2_2p,
    RelationId.T2_3, RelationId.T2_4, RelationId.T2_5,
})

# a subscript shift alone breaks balance; composed forms below restore it
_PLUS_G_MINUS = {"a": 2, "b": 1, "c": 1, "d": 1, "e": 1, "f": 1, "h": 1}
_PLUS_H_MINUS = {"a": 2, "b": 1, "c": 1, "d": 1, "e": 1, "f": 1, "g": 1}
_MINUS_G_PLUS = {"a": -2, "b": -1, "c": -1, "d": -1, "e": -1, "f": -1, "h": -1}


@dataclasses.dataclass(frozen=True)
class _Term:
    """One additive term: mono * prod(1-x, x in num) / prod(1-y, y in den)
    times the series at the shifted parameter tuple."""

    mono: mpc
    num: tuple
    den: tuple
    shift: dict

    def factors(self):
        for x in self.num:
            yield 1 - x
        for y in self.den:
            yield 1 - y

    def coefficient(self):
        val = self.mono
        for x in self.num:
            val = val * (1 - x)
        for y in self.den:
            val = val / (1 - y)
        return val


def _terms_L2_1(wp):
    a, b, c, d, e, f, g, h = (wp.a, wp.b, wp.c, wp.d,
                              wp.e, wp.f, wp.g, wp.h)
    q = wp.q
    one = mpc(1)
    num = (h * q / g, g * h / (a * q), a * q, a * q ** 2, b, c, d, e, f)
    den = (a * q / g, a * q ** 2 / g, a / h, a * q / h,
           a * q / b, a * q / c, a * q / d, a * q / e, a * q / f)
    return [
        _Term(one, (), (), {"g": -1, "h": 1}),
        _Term(-one, (), (), {}),
        _Term(-a * q / h, num, den, _PLUS_G_MINUS),
    ]


def _terms_L2_2(wp):
    a, c, d, g, q = wp.a, wp.c, wp.d, wp.g, wp.q
    return [
        _Term(c, (c, a / c, d * q / g, g * d / (a * q)), (),
              {"g": -1, "c": 1}),
        _Term(-d, (d, a / d, c * q / g, g * c / (a * q)), (),
              {"g": -1, "d": 1}),
        _Term(d, (g / q, c / d, a * q / g, c * d / a), (), {}),
    ]


def _terms_T2_3(wp):
    a, b, c, d, e, f, g, h = (wp.a, wp.b, wp.c, wp.d,
                              wp.e, wp.f, wp.g, wp.h)
    q = wp.q
    over = (b, c, d, e, f)
    return [
        _Term(g ** 2,
              (h, *[a * q / (g * x) for x in over]),
              (a * q / g, a * q ** 2 / g),
              _PLUS_G_MINUS),
        _Term(-h ** 2,
              (g, *[a * q / (h * x) for x in over]),
              (a * q / h, a * q ** 2 / h),
              _PLUS_H_MINUS),
        _Term(-g,
              (h / g, *[a * q / x for x in over]),
              (a * q, a * q ** 2),
              {}),
    ]


def _terms_T2_4(wp):
    a, b, c, d, e, f, g, h = (wp.a, wp.b, wp.c, wp.d,
                              wp.e, wp.f, wp.g, wp.h)
    q = wp.q
    over = (b, c, d, e, f)
    k1 = (g, (h, a / h, a * q / h, *[a * q / (g * x) for x in over]),
          (h * q / g,))
    k2 = (h, (g, a / g, a * q / g, *[a * q / (h * x) for x in over]),
          (g * q / h,))
    k3 = (a * q / h, (h / g, g * h / (a * q), b, c, d, e, f), ())
    # the first two printed terms are bracketed differences; expand them so
    # each additive piece enters the residual normalization on its own
    return [
        _Term(k1[0], k1[1], k1[2], {"g": -1, "h": 1}),
        _Term(-k1[0], k1[1], k1[2], {}),
        _Term(-k2[0], k2[1], k2[2], {"g": 1, "h": -1}),
        _Term(k2[0], k2[1], k2[2], {}),
        _Term(-k3[0], k3[1], k3[2], {}),
    ]


def _terms_T2_5(wp):
    a, b, c, d, e, f, g, h = (wp.a, wp.b, wp.c, wp.d,
                              wp.e, wp.f, wp.g, wp.h)
    q = wp.q
    over = (b, c, d, e, f)
    m1_num = (a * q, a * q ** 2, *[a * q / (g * x) for x in over],
              g * h / (a * q), h, b, c, d, e, f)
    m1_den = (a * q / g, a * q ** 2 / g, *[a * q / x for x in over])
    m2_num = (a / g, a * q / g, a / h, a * q / h,
              *[a / x for x in over])
    m2_den = (a / q, a)
    m3a_num = (h / g, g * h / (a * q), b, c, d, e, f)
    m3b_num = (a * q / g, a / h, a * q / h, h / q,
               *[a / (g * x) for x in over])
    m3b_den = (g * q / h, a / (g * q))
    m3c_num = (g, a / g, a * q / g, *[a * q / (h * x) for x in over])
    m3c_den = (g * q / h,)
    return [
        _Term(a * g * q / h, m1_num, m1_den, _PLUS_G_MINUS),
        _Term(-q, m2_num, m2_den, _MINUS_G_PLUS),
        _Term(-a * q / h, m3a_num, (), {}),
        _Term(-g ** 2 * q ** 2 / h, m3b_num, m3b_den, {}),
        _Term(h, m3c_num, m3c_den, {}),
    ]


_CATALOG = {
    RelationId.L2_1: _terms_L2_1,
    RelationId.L2_2: _terms_L2_2,
    RelationId.L2_1p: _terms_L2_1,
    RelationId.L2_2p: _terms_L2_2,
    RelationId.T2_3: _terms_T2_3,
    RelationId.T2_4: _terms_T2_4,
    RelationId.T2_5: _terms_T2_5,
}


def relation_terms(relation, wp, prec):
    """The additive terms of a relation at wp, before series evaluation."""
    with active(prec):
        return _CATALOG[relation](wp)


@dataclasses.dataclass(frozen=True)
class RelationReport:
    relation: RelationId
    params: WpParams
    dist: object  # DistinguishedChoice for Phi relations, else None
    lhs_terms: tuple
    residual: mpfr
    passed: bool


def _shift_key(shift):
    return tuple(sorted(shift.items()))


def relation_residual(relation, wp, dist=None, prec=None):
    """Evaluate one relation at wp and report the normalized residual.

    dist selects the distinguished slot for Phi-based relations and is
    ignored by the plain-phi ones.  Raises InadmissibleShift when a printed
    coefficient factor lies inside the singularity gap or a shifted tuple
    loses balance; singularities inside the series themselves surface as
    SingularFactor from the evaluators.
    """
    relation = RelationId(relation)
    prec = prec if prec is not None else Precision()
    use_phi = relation in PHI_RELATIONS
    with active(prec):
        gap = prec.singularity_gap
        terms = _CATALOG[relation](wp)
        for t in terms:
            for fac in t.factors():
                if abs(fac) < gap:
                    raise InadmissibleShift(
                        f"{relation.name} coefficient factor {fac} inside "
                        "the singularity gap")
        values = {}
        for t in terms:
            key = _shift_key(t.shift)
            if key in values:
                continue
            sh = wp.shifted(**dict(t.shift))
            if sh.balance_defect() > prec.residual_tol:
                raise InadmissibleShift(
                    f"shifted tuple {dict(t.shift)} violates balance")
            if use_phi:
                values[key] = phi_pair(sh, dist, prec).value
            else:
                values[key] = w10_9(sh.a, sh.params7(), sh.q, prec).value
        lhs = tuple(t.coefficient() * values[_shift_key(t.shift)]
                    for t in terms)
        total = mpc(0)
        peak = mpfr(0)
        for v in lhs:
            total = total + v
            peak = max(peak, abs(v))
        residual = abs(total) / max(mpfr(1), peak)
        return RelationReport(relation=relation, params=wp,
                              dist=dist if use_phi else None,
                              lhs_terms=lhs, residual=residual,
                              passed=residual < prec.residual_tol)


def admissible(relation, wp, prec, margin=2):
    """Whether wp is safely inside the domain of relation_residual.

    margin scales the singularity gap; the sampler keeps a factor-2 buffer
    so evaluation never runs at the very edge of the gap.
    """
    relation = RelationId(relation)
    with active(prec):
        tol = margin * prec.singularity_gap
        terms = _CATALOG[relation](wp)
        for t in terms:
            for fac in t.factors():
                if abs(fac) < tol:
                    return False
        seen = set()
        for t in terms:
            key = _shift_key(t.shift)
            if key in seen:
                continue
            seen.add(key)
            sh = wp.shifted(**dict(t.shift))
            if relation in PHI_RELATIONS:
                if not phi_clear(sh, tol):
                    return False
            elif not series_clear(sh.a, sh.params7(), sh.q, tol):
                return False
        return True


def sample_admissible(relation, seed, count, prec=None):
    """Draw count admissible (params, dist) pairs, deterministically.

    q is uniform in [0.3, 0.7]; a and b..g are q^theta with theta uniform
    in the box re in [-1.5, 1.5], im in [-0.5, 0.5]; h closes the balance.
    Distinguished slots cycle 1..7 across the accepted draws.  Raises
    SamplerExhausted once rejections exceed 1000 * count.
    """
    relation = RelationId(relation)
    if count < 1:
        raise ValueError("count must be at least 1")
    prec = prec if prec is not None else Precision()
    rng = random.Random(f"{relation.name}:{seed}")
    out = []
    rejections = 0
    with active(prec):
        while len(out) < count:
            if rejections > 1000 * count:
                raise SamplerExhausted(
                    f"{relation.name}: {rejections} rejections for "
                    f"{len(out)}/{count} accepted draws")
            q = mpfr(rng.uniform(0.3, 0.7))
            lnq = gmpy2.log(q)
            vals = []
            for _ in range(7):
                re = rng.uniform(-1.5, 1.5)
                im = rng.uniform(-0.5, 0.5)
                vals.append(gmpy2.exp(mpc(re * lnq, im * lnq)))
            wp = WpParams.from_balance(*vals, q, prec)
            dist = DIST_SLOTS[len(out) % len(DIST_SLOTS)]
            if admissible(relation, wp, prec):
                out.append((wp, dist))
            else:
                rejections += 1
    return out
