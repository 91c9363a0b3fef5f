import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from martstab import bellman as bm
from martstab.bellman import Family

P_SUB = st.floats(1.05, 1.95)
P_SUPER = st.floats(2.05, 6.0)


def test_u_origin_value_sub():
    expected = -1.5 * (1 - 1 / 1.5) ** 0.5
    assert bm.eval_U(1.5, [1.0, 0.0], [0.0, 0.0]) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(-0.8660254, abs=1e-7)


def test_u_vanishes_on_factor_zero_set():
    assert abs(bm.eval_U(1.5, [0.5, 0.0], [1.0, 0.0])) < 1e-14


def test_u_regions_super():
    assert bm.u_region(4.0, [1.0], [3.0]) == bm.u_region(4.0, [1.0], [2.5])
    assert bm.u_region(4.0, [1.0], [3.0]) != bm.u_region(4.0, [1.0], [1.0])


def test_v_values():
    assert bm.beta_p(1.5) == pytest.approx(math.sqrt(math.sin(math.pi / 3)) / math.cos(math.pi / 3))
    assert bm.eval_V(1.5, 1.0, 0.0) == pytest.approx(-1.8612097, abs=1e-7)
    assert abs(bm.eval_V(1.5, 0.5, 0.8660254037844386)) < 1e-12


@given(P_SUB | P_SUPER, st.floats(0.1, 3.0), st.floats(-3.0, 3.0), st.floats(0.1, 4.0))
def test_u_homogeneous(p, x, y, t):
    u1 = bm.eval_U(p, [t * x], [t * y])
    u0 = bm.eval_U(p, [x], [y])
    assert u1 == pytest.approx(t ** p * u0, rel=1e-9, abs=1e-12)


@given(P_SUB | P_SUPER, st.floats(0.05, 3.0), st.floats(-3.0, 3.0))
def test_u_below_majorant(p, x, y):
    # below 2 the roles of the pair are swapped
    lhs = bm.eval_U(p, [x], [y])
    if p < 2:
        rhs = (p - 1) ** p * abs(y) ** p - abs(x) ** p
    else:
        rhs = abs(y) ** p - (p - 1) ** p * abs(x) ** p
    assert lhs >= rhs - 1e-9 * (1 + abs(rhs))


@given(P_SUB | P_SUPER, st.floats(0.05, 3.0), st.floats(-3.0, 3.0))
def test_v_below_majorant(p, x, y):
    c = bm.orth_sharp_constant(p)
    lhs = bm.eval_V(p, x, y)
    rhs = abs(y) ** p - c ** p * abs(x) ** p
    assert lhs >= rhs - 1e-9 * (1 + abs(rhs))


def test_majorization_tangency_sub():
    sw = bm.majorization_sweep(1.5, Family.NON_ORTH, n=10_000)
    assert sw.tangency == pytest.approx(1 / 1.5)
    assert abs(sw.tangency_gap) < 1e-12
    h = 1e-6
    quotient = (bm.majorization_gap(1.5, Family.NON_ORTH, 1 / 1.5 + h)
                - bm.majorization_gap(1.5, Family.NON_ORTH, 1 / 1.5)) / h
    assert abs(quotient) < 1e-4
    orth = bm.majorization_sweep(1.5, Family.ORTH, n=10_000)
    assert orth.tangency == pytest.approx(math.pi / 3)
    assert abs(orth.tangency_gap) < 1e-12


def test_majorization_gap_at_zero_super():
    p = 4.0
    expected = -(p * (1 - 1 / p) ** (p - 1) - 1 - bm.alpha_p(p))
    assert expected <= 0
    assert bm.majorization_gap(p, Family.NON_ORTH, 0.0) <= 1e-12


@pytest.mark.parametrize("p", [1.1, 1.5, 1.9, 2.1, 3.0, 5.5])
@pytest.mark.parametrize("family", list(Family))
def test_majorization_sweeps(p, family):
    sw = bm.majorization_sweep(p, family, n=200_000)
    assert sw.max_gap <= 1e-10
    assert abs(sw.tangency_gap) <= 1e-8


def test_majorization_rejects_two():
    with pytest.raises(ValueError):
        bm.majorization_sweep(2.0, Family.ORTH, n=100)


def test_hessian_zero_direction():
    assert bm.hessian_form_U(1.5, [1.0], [0.3], [0.0], [0.0]) == 0.0


def test_hessian_equal_lengths():
    assert bm.hessian_form_U(1.5, [1.0, 0.0], [0.2, 0.0], [1.0, 0.0], [1.0, 0.0]) <= 1e-6


def test_hessian_lower_piece_closed_form():
    p = 4.0
    c2 = -p ** (3 - p) * (p - 1) ** (2 * p - 2)
    # perpendicular direction: the bound is attained
    perp = bm.hessian_form_U(p, [1.0, 0.0], [0.5, 0.0], [0.0, 1.0], [0.0, 0.0])
    assert perp == pytest.approx(c2, rel=1e-4)
    # radial direction picks up the extra (p-2) term and stays below the bound
    radial = bm.hessian_form_U(p, [1.0, 0.0], [0.5, 0.0], [1.0, 0.0], [0.0, 0.0])
    assert radial == pytest.approx(c2 * (p - 1), rel=1e-4)
    assert radial <= c2


def test_hessian_proximity_guard():
    with pytest.raises(bm.ProximityError):
        bm.hessian_form_U(1.5, [1.0], [0.0], [1.0], [0.5])


def test_superharmonic_examples():
    assert bm.superharmonic_defect_V(1.5, 1.0, 1.0, step=1e-3) <= 1e-6
    assert abs(bm.superharmonic_defect_V(4.0, 0.1, 1.0)) <= 1e-5
    g = bm.gamma_p(4.0)
    assert bm.superharmonic_defect_V(4.0, 1.0, 0.05) == pytest.approx(-12 * g, rel=1e-4)


def test_y_convexity():
    assert bm.y_convexity_defect(1.5, Family.NON_ORTH, [1.0, 0.0], [1.0, 0.0], [0.0, 1.0]) >= -1e-8
    assert abs(bm.y_convexity_defect(4.0, Family.ORTH, 1.0, 0.05)) < 1e-6
    p = 1.5
    val = bm.y_convexity_defect(p, Family.ORTH, 1.0, 0.3)
    assert val >= 0


@pytest.mark.parametrize("p", [1.25, 3.0])
def test_hessian_random_sample(p):
    sw = bm.hessian_sample_sweep(p, n_samples=1500, seed=7)
    assert sw.coverage > 0.99
    assert sw.worst <= 1e-6


def test_superharmonic_random_sample():
    sw = bm.superharmonic_sample_sweep(4.0, n_samples=2000, seed=3)
    assert sw.coverage > 0.99
    assert sw.worst <= 1e-5


def test_lemma_tech2_value():
    a = 1.5 * (1 / 3) ** 0.5
    assert bm.lemma_margin("tech2", 1.5) == pytest.approx(a * 0.25 - (1 - a), abs=1e-14)
    # the rearranged form a (2 - p/2) >= 1 gives the same number
    assert bm.lemma_margin("tech2", 1.5) == pytest.approx(a * 1.25 - 1, abs=1e-14)
    assert bm.lemma_margin("tech2", 1.5) == pytest.approx(0.0825318, abs=1e-7)


@pytest.mark.parametrize("lemma", sorted(bm.LEMMAS))
def test_lemma_grid_margins(lemma):
    grid = bm.lemma_grid(lemma, 1000)
    assert np.min(bm.lemma_margin(lemma, grid)) >= -1e-12


def test_lemma_equality_endpoints():
    assert abs(bm.lemma_margin("te1", 2.0)) <= 1e-10
    assert abs(bm.lemma_margin("gen2", 2.0)) <= 1e-10


def test_constants_near_two_are_finite():
    below = bm.constants(2 - 1e-9)
    above = bm.constants(2 + 1e-9)
    for v in (below.c_nonorth, below.c_orth, below.kappa_p, below.beta_p):
        assert math.isfinite(v)
    for v in (above.c_nonorth, above.c_orth, above.alpha_p, above.gamma_p, above.mu_p):
        assert math.isfinite(v)
    assert above.alpha_p == pytest.approx((1e-9) * (0.5 - 1 / math.e), rel=1e-6)


def _mp_margins(p):
    import mpmath as mp
    mp.mp.dps = 40
    p = mp.mpf(p)
    a = p * (1 - 1 / p) ** (p - 1)
    q = mp.pi / (2 * p)
    return {
        "tech2": p ** (2 - p) * (p - 1) ** (p - 1) * (2 - p) / 2 - (1 - a),
        "te1": (1 - 1 / p) ** (p - 1) - 2 / (p + 2),
        "te3": mp.mpf(1) / 2 - (1 - 1 / p) ** (p - 1),
        "gen0": mp.sqrt((p - 1) / p) - mp.sin(q) / mp.sin(mp.pi / (2 * (p - 1))),
        "gen2": mp.cos(q) ** (p - 1) - 1 / mp.sqrt(2),
    }


@pytest.mark.parametrize("p", [1.2, 1.5, 1.9, 2.3, 3.0, 7.0])
def test_lemmas_against_high_precision(p):
    for name, ref in _mp_margins(p).items():
        if bm.lemma_applies(name, p):
            assert float(bm.lemma_margin(name, p)) == pytest.approx(float(ref), abs=1e-13)
