import dataclasses

import gmpy2
import pytest
from gmpy2 import mpc, mpfr

from conftest import assert_close, cnum, rel_diff
from qcfrac.errors import AliasRejected, OutsideConvergence
from qcfrac.qnum import active, qpoch_multi
from qcfrac.recurrence import (
    ASYMPTOTE_IDS,
    RecurrenceSystem,
    SolutionId,
    alias_scan,
    all_solution_ids,
    asymptote_check,
    casorati,
    coeffs,
    family_value,
    minimal_solution,
    reflection_check,
    residual_check,
    sample_systems,
    solution_eval,
    w1_w2,
)

# one fixed generic point with q = 0.5 for the hand/limit checks
FIXED = dict(a="1.3+0.2j", b="0.8-0.1j", c="1.1+0.15j", d="0.55-0.3j",
             e="0.77+0.15j", f="0.9+0.05j", h="1.15-0.1j", q="0.5")


def _fixed_system(prec):
    with active(prec):
        vals = {k: mpc(complex(v.replace("j", "j"))) for k, v in FIXED.items()}
        return RecurrenceSystem.make(vals["a"], vals["b"], vals["c"],
                                     vals["d"], vals["e"], vals["f"],
                                     vals["h"], vals["q"], prec)


# interchange variants of families 7/8 that are genuinely new solutions;
# the remaining twenty are constant multiples of earlier ones
NEW_INTERCHANGE_LABELS = (
    "X7xd.s2", "X7xe.s2", "X7xe.s3", "X7xf.s2", "X7xf.s3", "X7xf.s4",
    "X8xd.s2", "X8xe.s2", "X8xe.s3", "X8xf.s2", "X8xf.s3", "X8xf.s4",
)

ALIAS_PAIR_LABELS = (
    ("X7xc.s2", "X7.s2"), ("X7xc.s3", "X7xd.s2"), ("X7xc.s4", "X7xe.s2"),
    ("X7xc.s5", "X7xf.s2"), ("X7xd.s3", "X7.s3"), ("X7xd.s4", "X7xe.s3"),
    ("X7xd.s5", "X7xf.s3"), ("X7xe.s4", "X7.s4"), ("X7xe.s5", "X7xf.s4"),
    ("X7xf.s5", "X7.s5"), ("X8xc.s2", "X8.s2"), ("X8xc.s3", "X8xd.s2"),
    ("X8xc.s4", "X8xe.s2"), ("X8xc.s5", "X8xf.s2"), ("X8xd.s3", "X8.s3"),
    ("X8xd.s4", "X8xe.s3"), ("X8xd.s5", "X8xf.s3"), ("X8xe.s4", "X8.s4"),
    ("X8xe.s5", "X8xf.s4"), ("X8xf.s5", "X8.s5"),
)


class TestCoeffs:
    def test_large_n_limits(self, prec):
        sys = _fixed_system(prec)
        with active(prec):
            a_n, b_n, _, _ = coeffs(sys, 200, prec)
            assert abs(a_n - (1 + sys.q)) < mpfr("1e-20")
            assert abs(b_n - sys.q) < mpfr("1e-20")

    def test_b_is_product_of_parts(self, prec):
        sys = _fixed_system(prec)
        with active(prec):
            for n in (1, 2, 5):
                _, b_n, _, B_n = coeffs(sys, n, prec)
                _, _, A_prev, _ = coeffs(sys, n - 1, prec)
                assert_close(b_n, A_prev * B_n, float(prec.residual_tol),
                             f"b_{n}")

    def test_finite_over_small_indices(self, prec):
        sys = sample_systems(21, 1, prec, n_lo=0, n_hi=10)[0]
        with active(prec):
            for n in range(11):
                vals = coeffs(sys, n, prec)
                assert all(gmpy2.is_finite(v) for v in vals)


class TestSolutions:
    @pytest.mark.parametrize("family,dist", [(1, 1), (2, 3), (3, 2), (4, 4),
                                             (5, 5), (6, 2), (7, 2), (8, 4)])
    def test_recurrence_residual_one_per_family(self, family, dist, prec30):
        sol = SolutionId(family, dist)
        sys = sample_systems(31, 1, prec30, n_lo=1, n_hi=3,
                             solutions=(sol,), label="perfam")[0]
        worst = residual_check(sys, sol, 1, 3, prec30)
        assert worst < prec30.residual_tol, f"{sol.label()}: {worst}"

    def test_interchange_variant_satisfies_recurrence(self, prec30):
        sol = SolutionId(7, 2, "c")
        sys = sample_systems(33, 1, prec30, n_lo=1, n_hi=3,
                             solutions=(sol,), label="interchange")[0]
        worst = residual_check(sys, sol, 1, 3, prec30)
        assert worst < prec30.residual_tol

    def test_corrupted_coefficients_fail(self, prec30):
        # 1% parameter corruption breaks the balance behind the recurrence
        sol = SolutionId(1, 1)
        sys = sample_systems(35, 1, prec30, n_lo=1, n_hi=3,
                             solutions=(sol,), label="corrupt")[0]
        with active(prec30):
            bad = dataclasses.replace(sys, b=sys.b * mpfr("1.01"))
            xs = [solution_eval(sys, sol, n, prec30).value for n in (0, 1, 2)]
            a_1, b_1, _, _ = coeffs(bad, 1, prec30)
            res = abs(xs[2] - a_1 * xs[1] + b_1 * xs[0]) / max(
                mpfr(1), abs(xs[2]), abs(a_1 * xs[1]), abs(b_1 * xs[0]))
            assert res > mpfr("1e-3")

    def test_family3_constant_multiple_of_family1(self, prec):
        # slot 6 of the first family and slot 7 of the third hold the same
        # distinguished value; the solutions differ by a fixed product ratio
        sys = _fixed_system(prec)
        with active(prec):
            a, b, c, d, e, f, h, q = (sys.a, sys.b, sys.c, sys.d, sys.e,
                                      sys.f, sys.h, sys.q)
            s = sys.s
            num = (a * q, b, c, d, e, f, h, q / h)
            den = (a * q / b, a * q / c, a * q / d, a * q / e, a * q / f,
                   s / (a * q), a * h * q / s, s / (a * h))
            const = (qpoch_multi(num, q, "inf", prec).value
                     / qpoch_multi(den, q, "inf", prec).value)
            for n in (1, 2, 3):
                x1 = family_value(sys, 1, 6, n, prec).value
                x3 = family_value(sys, 3, 7, n, prec).value
                assert_close(x1, const * x3, float(prec.residual_tol),
                             f"constant multiple at n={n}")


class TestReflection:
    def test_ratios_are_one(self, prec):
        systems = sample_systems(41, 3, prec, n_lo=0, n_hi=4,
                                 reflect_ns=(0, 1, 2, 3), label="reflect")
        for sys in systems:
            for n in (0, 1, 2, 3):
                ra, rb = reflection_check(sys, n, prec)
                with active(prec):
                    assert abs(ra - 1) < prec.residual_tol, f"n={n} a-ratio"
                    assert abs(rb - 1) < prec.residual_tol, f"n={n} b-ratio"

    def test_wrong_exponent_is_detected(self, prec):
        sys = sample_systems(43, 1, prec, n_lo=0, n_hi=2,
                             reflect_ns=(1,), label="reflectneg")[0]
        ra, _ = reflection_check(sys, 1, prec)
        with active(prec):
            # normalizing with q^-2n instead of q^(1-2n) scales by q
            assert abs(ra * sys.q - 1) > mpfr("1e-3")


class TestCasorati:
    def test_same_solution_vanishes(self, prec30):
        sys = sample_systems(45, 1, prec30, n_lo=0, n_hi=3,
                             solutions=(SolutionId(1, 6),),
                             label="casorati0")[0]
        assert casorati(sys, SolutionId(1, 6), SolutionId(1, 6), 1,
                        prec30) == 0

    def test_scaled_casorati_is_constant(self, prec):
        # W_n collapses like q^2n while the solutions stay O(1), so the
        # two-product cancellation eats ~half the digits by n = 40; the
        # 50-digit budget leaves the 1e-10 comparison comfortable
        ids = (SolutionId(1, 6), SolutionId(2, 7))
        sys = sample_systems(47, 1, prec, n_lo=0, n_hi=3,
                             solutions=ids,
                             solutions_ns=(-1, 0, 1, 30, 31, 40, 41),
                             label="casoratiC")[0]
        with active(prec):
            def scaled(n):
                w = casorati(sys, ids[0], ids[1], n, prec)
                prod = mpc(1)
                for k in range(1, n + 1):
                    prod = prod * coeffs(sys, k, prec)[1]
                return w / prod

            r30, r40 = scaled(30), scaled(40)
            assert rel_diff(r30, r40) < 1e-10
            b0 = coeffs(sys, 0, prec)[1]
            wm1 = casorati(sys, ids[0], ids[1], -1, prec)
            assert rel_diff(r30, b0 * wm1) < 1e-10


class TestLimits:
    def test_w1_unit_parameter(self, prec):
        sys = _fixed_system(prec)
        with active(prec):
            sys1 = dataclasses.replace(sys, b=mpc(1))
        w1, _ = w1_w2(sys1, prec)
        assert w1.value == 1

    def test_outside_annulus_rejected(self, prec):
        sys = _fixed_system(prec)
        with active(prec):
            # shrinking bcdef inflates s = a^3 q^3/(bcdef) beyond |aq|
            big_s = dataclasses.replace(sys, b=sys.b / 8, c=sys.c / 8,
                                        d=sys.d / 8)
        with pytest.raises(OutsideConvergence):
            w1_w2(big_s, prec)

    def test_asymptotes_of_the_three_printed_families(self, prec30):
        sys = sample_systems(49, 1, prec30, n_lo=0, n_hi=2, annulus=True,
                             label="asymp")[0]
        for family, dist in ASYMPTOTE_IDS:
            measured, reference = asymptote_check(sys, family, dist, prec30,
                                                  n_big=40)
            assert rel_diff(measured, reference) < 1e-5, (
                f"family {family} slot {dist}")

    def test_minimal_solution_decays_like_qn(self, prec30):
        sys = sample_systems(51, 1, prec30, n_lo=0, n_hi=2, annulus=True,
                             z_cap="0.8", label="minimal")[0]
        with active(prec30):
            w = w1_w2(sys, prec30)
            q = abs(sys.q)

            def ratio_to_dominant(n):
                xm = minimal_solution(sys, n, prec30, _w=w).value
                x1 = family_value(sys, 1, 6, n, prec30).value
                return abs(xm / x1)

            r25, r26 = ratio_to_dominant(25), ratio_to_dominant(26)
            assert r25 < mpfr("1e-5")
            assert r26 < r25
            # three-term residual of the minimal combination itself
            xs = [minimal_solution(sys, n, prec30, _w=w).value
                  for n in (1, 2, 3)]
            a_2, b_2, _, _ = coeffs(sys, 2, prec30)
            res = abs(xs[2] - a_2 * xs[1] + b_2 * xs[0]) / max(
                mpfr(1), abs(xs[2]), abs(a_2 * xs[1]), abs(b_2 * xs[0]))
            assert res < prec30.residual_tol
            # successive-ratio estimate of the decay rate
            x30 = minimal_solution(sys, 30, prec30, _w=w).value
            x31 = minimal_solution(sys, 31, prec30, _w=w).value
            assert abs(abs(x31 / x30) - q) < mpfr("1e-4")


class TestAliases:
    def test_excluded_slots_rejected(self):
        for family, slots in ((3, (7,)), (4, (7,)), (5, (1, 7)), (6, (1, 7)),
                              (7, (1, 6, 7)), (8, (1, 6, 7))):
            for dist in slots:
                with pytest.raises(AliasRejected):
                    SolutionId(family, dist)

    def test_fifty_six_solutions(self):
        ids = all_solution_ids(include_interchanges=True)
        labels = [s.label() for s in ids]
        assert len(labels) == len(set(labels)) == 76  # before de-aliasing
        base = all_solution_ids(include_interchanges=False)
        assert len(base) == 44

    def test_interchange_alias_classification(self, prec30):
        sys = sample_systems(3, 1, prec30, n_lo=1, n_hi=3,
                             label="aliasscan")[0]
        independent, pairs = alias_scan(sys, prec30, n0=1)
        assert len(independent) == 56
        got_new = sorted(s.label() for s in independent if s.interchange)
        assert got_new == sorted(NEW_INTERCHANGE_LABELS)
        got_pairs = sorted((c.label(), r.label()) for c, r in pairs)
        assert got_pairs == sorted(ALIAS_PAIR_LABELS)

    def test_label_format(self):
        assert SolutionId(1, 1).label() == "X1.s1"
        assert SolutionId(7, 2, "d").label() == "X7xd.s2"

    def test_interchange_only_for_families_7_8(self):
        with pytest.raises(ValueError):
            SolutionId(1, 1, "c")
        with pytest.raises(ValueError):
            SolutionId(7, 2, "g")


class TestSampler:
    def test_determinism(self, prec30):
        a = sample_systems(61, 2, prec30, n_lo=0, n_hi=2)
        b = sample_systems(61, 2, prec30, n_lo=0, n_hi=2)
        assert a == b

    def test_annulus_flag(self, prec30):
        systems = sample_systems(63, 3, prec30, n_lo=0, n_hi=2, annulus=True)
        with active(prec30):
            for sys in systems:
                assert abs(sys.s / (sys.a * sys.q)) < mpfr("0.9")
                assert abs(sys.a * sys.q ** 2 / sys.s) < mpfr("0.9")

    def test_count_validation(self, prec30):
        with pytest.raises(ValueError):
            sample_systems(65, 0, prec30)
