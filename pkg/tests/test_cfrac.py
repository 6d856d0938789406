import dataclasses
import math

import gmpy2
import pytest
from gmpy2 import mpc, mpfr

from conftest import assert_close, cnum, rel_diff
from qcfrac.cfrac import (
    ContinuedFraction,
    convergents,
    corollary32_near_termination,
    corollary32_rhs,
    corollary33_rhs,
    entry40_system,
    is_entry40,
    minimal_ratio,
    pincherle_rhs,
    recurrence_fraction,
    sample_h1_systems,
    sample_terminating_systems,
    terminating_level,
)
from qcfrac.errors import NotTerminating
from qcfrac.qnum import active
from qcfrac.recurrence import coeffs, sample_systems


class TestConvergents:
    def test_vanishing_partial_numerators(self, prec):
        cf = ContinuedFraction(partial_num=lambda n: 0,
                               partial_den=lambda n: mpfr("2.5"))
        tr = convergents(cf, 5, prec)
        with active(prec):
            for v in tr.values:
                assert_close(v, 1 / mpfr("2.5"), 1e-45, "b=0 fraction")

    def test_single_level(self, prec):
        cf = ContinuedFraction(partial_num=lambda n: 1,
                               partial_den=lambda n: mpfr(4), length=0)
        tr = convergents(cf, 0, prec)
        assert len(tr.values) == 1
        with active(prec):
            assert_close(tr.last(), mpfr("0.25"), 1e-45, "N=0")

    def test_level_past_finite_length_rejected(self, prec):
        cf = ContinuedFraction(partial_num=lambda n: 1,
                               partial_den=lambda n: mpfr(4), length=0)
        with pytest.raises(ValueError):
            convergents(cf, 1, prec)

    def test_constant_tail_fixed_point(self, prec):
        # a_n = 1+q, b_n = q: the value solves x = 1/(1+q-qx)
        with active(prec):
            q = mpfr("0.5")
            cf = ContinuedFraction(partial_num=lambda n: q,
                                   partial_den=lambda n: 1 + q)
            tr = convergents(cf, 220, prec)
            x = mpc(0)
            for _ in range(2500):
                x = 1 / (1 + q - q * x)
            assert_close(tr.last(), x, 1e-30, "fixed point")

    def test_pole_is_flagged_and_iteration_continues(self, prec):
        # a0 = a1 = b1 = 1 makes the level-1 denominator vanish
        cf = ContinuedFraction(partial_num=lambda n: 1,
                               partial_den=lambda n: 1)
        tr = convergents(cf, 3, prec)
        assert 1 in tr.poles
        assert not gmpy2.is_finite(tr.values[1])
        assert gmpy2.is_finite(tr.values[2])

    def test_deltas_consistent(self, prec):
        cf = ContinuedFraction(partial_num=lambda n: mpfr("0.3"),
                               partial_den=lambda n: mpfr("1.7"))
        tr = convergents(cf, 10, prec)
        with active(prec):
            for k, d in enumerate(tr.deltas):
                assert d == tr.values[k + 1] - tr.values[k]


class TestPincherle:
    def test_matches_convergents(self, prec30):
        sys = sample_systems(72, 1, prec30, n_lo=0, n_hi=2, annulus=True,
                             label="pincherle")[0]
        rhs = pincherle_rhs(sys, prec30)
        tr = convergents(recurrence_fraction(sys, prec30), 60, prec30)
        with active(prec30):
            assert abs(tr.last() - rhs) < mpfr("1e-8")

    def test_matches_minimal_solution_ratio(self, prec30):
        sys = sample_systems(73, 1, prec30, n_lo=0, n_hi=2, annulus=True,
                             label="pincherle")[0]
        rhs = pincherle_rhs(sys, prec30)
        mr = minimal_ratio(sys, prec30)
        assert rel_diff(rhs, mr) < float(prec30.residual_tol)

    def test_geometric_convergence_rate(self, prec30):
        sys = sample_systems(72, 1, prec30, n_lo=0, n_hi=2, annulus=True,
                             label="pincherle")[0]
        rhs = pincherle_rhs(sys, prec30)
        tr = convergents(recurrence_fraction(sys, prec30), 40, prec30)
        with active(prec30):
            q = float(abs(sys.q))
            pts = [(K, math.log(float(abs(tr.values[K] - rhs))))
                   for K in range(8, 41)
                   if abs(tr.values[K] - rhs) > mpfr("1e-24")]
        n = len(pts)
        assert n >= 10
        sx = sum(k for k, _ in pts)
        sy = sum(y for _, y in pts)
        sxx = sum(k * k for k, _ in pts)
        sxy = sum(k * y for k, y in pts)
        slope = (n * sxy - sx * sy) / (n * sxx - sx * sx)
        assert abs(slope / math.log(q) - 1) < 0.2

    def test_h_to_one_limit_consistent_with_closed_form(self, prec):
        sys = sample_h1_systems(81, 1, prec)[0]
        exact = corollary32_rhs(sys, prec)
        with active(prec):
            pert = dataclasses.replace(sys, h=sys.h * (1 + mpfr("1e-8")))
        generic = pincherle_rhs(pert, prec)
        # the fraction value is O(10^2) at sampled points, so the
        # detuning error is measured relative to it
        assert rel_diff(generic, exact) < 1e-6


class TestCorollary32:
    def test_matches_convergents(self, prec):
        for sys in sample_h1_systems(81, 2, prec):
            rhs = corollary32_rhs(sys, prec)
            tr = convergents(recurrence_fraction(sys, prec), 60, prec)
            with active(prec):
                assert abs(tr.last() - rhs) < mpfr("1e-8")

    def test_requires_h_equal_one(self, prec):
        sys = sample_systems(72, 1, prec, n_lo=0, n_hi=2, annulus=True,
                             label="pincherle")[0]
        with pytest.raises(ValueError):
            corollary32_rhs(sys, prec)

    def test_near_termination_matches_terminating_form(self, prec):
        pairs = sample_terminating_systems(87, 2, prec, annulus=True)
        for sys, N in pairs:
            exact = corollary33_rhs(sys, prec)
            near = corollary32_near_termination(sys, prec)
            assert rel_diff(near, exact) < 1e-6, f"N={N}"


class TestCorollary33:
    def test_level_zero_is_reciprocal_a0(self, prec):
        pairs = sample_terminating_systems(89, 6, prec)
        sys, N = next((s, n) for s, n in pairs if n == 0)
        rhs = corollary33_rhs(sys, prec)
        with active(prec):
            a0 = coeffs(sys, 0, prec)[0]
            tol = mpfr(10) ** -(prec.digits - 10)
            assert abs(rhs - 1 / a0) < tol * max(1, abs(1 / a0))

    def test_finite_fraction_matches_rhs(self, prec):
        pairs = sample_terminating_systems(83, 8, prec)
        sys, N = next((s, n) for s, n in pairs if n == 3)
        rhs = corollary33_rhs(sys, prec)
        tr = convergents(recurrence_fraction(sys, prec, length=N), N, prec)
        with active(prec):
            tol = mpfr(10) ** -(prec.digits - 10)
            assert abs(tr.last() - rhs) < tol * max(1, abs(rhs))

    def test_seeded_terminating_suite(self, prec):
        for sys, N in sample_terminating_systems(91, 3, prec):
            rhs = corollary33_rhs(sys, prec)
            tr = convergents(recurrence_fraction(sys, prec, length=N), N,
                             prec)
            with active(prec):
                tol = mpfr(10) ** -(prec.digits - 10)
                assert abs(tr.last() - rhs) < tol * max(1, abs(rhs)), f"N={N}"

    def test_terminating_level_reports_letter(self, prec):
        sys, N = sample_terminating_systems(93, 1, prec)[0]
        lvl, letter = terminating_level(sys, prec)
        assert lvl == N
        assert letter == "f"  # the sampler builds f = aq^{N+1}

    def test_not_terminating(self, prec):
        sys = sample_h1_systems(86, 1, prec)[0]
        with pytest.raises(NotTerminating):
            corollary33_rhs(sys, prec)

    def test_requires_h_equal_one(self, prec):
        sys = sample_systems(73, 1, prec, n_lo=0, n_hi=2, annulus=True,
                             label="pincherle")[0]
        with pytest.raises(ValueError):
            corollary33_rhs(sys, prec)


class TestEntry40:
    def test_special_configuration_detected(self, prec):
        sys = entry40_system(85, prec, N=3)
        assert is_entry40(sys, prec)
        generic, _ = sample_terminating_systems(83, 1, prec)[0]
        assert not is_entry40(generic, prec)

    def test_fraction_value(self, prec):
        sys = entry40_system(85, prec, N=3)
        rhs = corollary33_rhs(sys, prec)
        tr = convergents(recurrence_fraction(sys, prec, length=3), 3, prec)
        with active(prec):
            tol = mpfr(10) ** -(prec.digits - 10)
            assert abs(tr.last() - rhs) < tol * max(1, abs(rhs))
