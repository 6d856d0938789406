import pytest
from gmpy2 import mpfr

from conftest import rel_diff
from qcfrac.contiguous import (
    PHI_RELATIONS,
    RelationId,
    admissible,
    relation_residual,
    sample_admissible,
)
from qcfrac.errors import InadmissibleShift
from qcfrac.qnum import active

ALL_RELATIONS = list(RelationId)


@pytest.mark.parametrize("relation", ALL_RELATIONS, ids=lambda r: r.name)
def test_residual_on_seeded_samples(relation, prec):
    for wp, dist in sample_admissible(relation, seed=1, count=4, prec=prec):
        report = relation_residual(relation, wp, dist=dist, prec=prec)
        assert report.passed, (
            f"{relation.name} residual {report.residual} at dist={dist}")
        assert report.residual < prec.residual_tol


def test_sampler_count_and_admissibility(prec):
    out = sample_admissible(RelationId.L2_1, seed=1, count=10, prec=prec)
    assert len(out) == 10
    for wp, dist in out:
        assert admissible(RelationId.L2_1, wp, prec)


def test_sampler_determinism(prec):
    a = sample_admissible(RelationId.T2_5, seed=1, count=10, prec=prec)
    b = sample_admissible(RelationId.T2_5, seed=1, count=10, prec=prec)
    assert [(wp, d) for wp, d in a] == [(wp, d) for wp, d in b]


def test_sampler_distinct_seeds_differ(prec):
    a = sample_admissible(RelationId.L2_1, seed=1, count=3, prec=prec)
    b = sample_admissible(RelationId.L2_1, seed=2, count=3, prec=prec)
    assert a[0][0] != b[0][0]


def test_t2_4_choice_of_distinguished_slot(prec):
    wp, _ = sample_admissible(RelationId.T2_4, seed=3, count=1, prec=prec)[0]
    for dist in (1, 4):  # slots holding b and e
        report = relation_residual(RelationId.T2_4, wp, dist=dist, prec=prec)
        assert report.passed, f"dist={dist} residual {report.residual}"


@pytest.mark.parametrize("relation", [RelationId.L2_1p, RelationId.L2_2p],
                         ids=lambda r: r.name)
def test_all_seven_distinguished_choices(relation, prec):
    wp, _ = sample_admissible(relation, seed=5, count=1, prec=prec)[0]
    for dist in range(1, 8):
        report = relation_residual(relation, wp, dist=dist, prec=prec)
        assert report.passed, f"dist={dist} residual {report.residual}"


def test_t2_5_degenerate_coefficient_rejected(prec):
    wp, dist = sample_admissible(RelationId.T2_5, seed=7, count=1,
                                 prec=prec)[0]
    with active(prec):
        # g = h zeroes the printed (1 - h/g) coefficient factor; rebalance
        # through b so only the degeneracy changes
        wp2 = wp.replace(g=wp.h, b=wp.b * wp.g / wp.h)
    with pytest.raises(InadmissibleShift):
        relation_residual(RelationId.T2_5, wp2, dist=dist, prec=prec)


def test_unbalanced_shift_rejected(prec):
    wp, dist = sample_admissible(RelationId.L2_1, seed=9, count=1,
                                 prec=prec)[0]
    with active(prec):
        wp2 = wp.replace(b=wp.b * mpfr("1.004"))
    with pytest.raises(Exception):
        relation_residual(RelationId.L2_1, wp2, dist=dist, prec=prec)


def test_higher_digits_shrink_residual(prec, prec100):
    from qcfrac.series import WpParams
    wp, dist = sample_admissible(RelationId.L2_1, seed=11, count=1,
                                 prec=prec)[0]
    low = relation_residual(RelationId.L2_1, wp, dist=dist, prec=prec)
    # the point must be re-balanced at the target precision before the
    # stricter balance tolerance applies
    wp_hi = WpParams.from_balance(wp.a, wp.b, wp.c, wp.d, wp.e, wp.f,
                                  wp.g, wp.q, prec100)
    high = relation_residual(RelationId.L2_1, wp_hi, dist=dist, prec=prec100)
    assert high.residual < low.residual
    # the residual is rounding noise, so 50 extra digits buy >= 20 orders
    assert float(high.residual) < float(low.residual) * 1e-20 or \
        float(high.residual) < 1e-100


def test_phi_relation_set(prec):
    assert RelationId.L2_1 not in PHI_RELATIONS
    assert RelationId.L2_2 not in PHI_RELATIONS
    for r in (RelationId.L2_1p, RelationId.L2_2p, RelationId.T2_3,
              RelationId.T2_4, RelationId.T2_5):
        assert r in PHI_RELATIONS


def test_report_fields(prec):
    wp, dist = sample_admissible(RelationId.T2_3, seed=13, count=1,
                                 prec=prec)[0]
    report = relation_residual(RelationId.T2_3, wp, dist=dist, prec=prec)
    assert report.relation is RelationId.T2_3
    assert report.params == wp
    assert report.dist == dist
    assert len(report.lhs_terms) >= 3
    with active(prec):
        peak = max(abs(t) for t in report.lhs_terms)
        total = sum(report.lhs_terms)
        assert rel_diff(report.residual,
                        abs(total) / max(mpfr(1), peak)) < 1e-30
