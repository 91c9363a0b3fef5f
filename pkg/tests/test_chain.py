import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from martstab import chain as ch
from martstab.chain import ChainSpec, ChainState, Node, Phase


def spec(p=1.5, K=4.0, N=2, eta=0.0):
    return ChainSpec.from_K(p, K, N, eta)


def atom_prob(dist, f, g, tol=1e-12):
    return sum(pr for a, b, pr in dist.atoms if abs(a - f) < tol and abs(b - g) < tol)


def test_delta_half():
    assert spec().delta == pytest.approx(0.5)


def test_diagonal_split():
    s = spec()
    state = ChainState(0.5, -0.5, 1, Phase.FIRST_STAGE, Node.DIAGONAL, -1)
    out = {(t.f, t.g): q for t, q in ch.transitions(s, state)}
    assert out == {(1.0, 0.0): 0.5, (0.0, -1.0): 0.5}


def test_axis_split_by_hand():
    s = spec()
    state = ChainState(0.0, 1.0, 2, Phase.FIRST_STAGE, Node.AXIS, 0)
    out = {(round(t.f, 12), round(t.g, 12)): q for t, q in ch.transitions(s, state)}
    assert out[(round(2 / 3, 12), round(1 / 3, 12))] == pytest.approx(3 / 7, abs=1e-15)
    assert out[(-0.5, 1.5)] == pytest.approx(4 / 7, abs=1e-15)


def test_second_stage_split():
    p, eta = 1.5, 0.1
    s = spec(p, 4.0, 2, eta)
    # landing state on the line waits for a step of the right parity, then splits
    state = ChainState(1.0, p - 1, 3, Phase.WAIT_SPLIT, Node.LINE, 0)
    moves = ch.transitions(s, state)
    if len(moves) == 1:
        moves = ch.transitions(s, moves[0][0])
    got = sorted((round(t.f, 12), round(t.g, 12), round(q, 14)) for t, q in moves)
    assert got == [(0.9, round(p - 1 + eta, 12), 0.5), (1.1, round(p - 1 - eta, 12), 0.5)]


def test_transform_rule_every_move():
    s = spec(4.0, 4.0, 6, 0.5)
    res = ch.enumerate_chain(s)
    assert res.max_transform_residual <= 1e-12
    assert res.max_martingale_residual <= 1e-12
    assert res.max_prob_violation == 0.0


def test_hand_atoms():
    law = ch.terminal_distribution(spec(), "enumerate")
    assert atom_prob(law, 1.0, 0.0) == pytest.approx(0.5, abs=1e-15)
    assert atom_prob(law, 2 / 3, 1 / 3) == pytest.approx(3 / 14, abs=1e-15)
    assert atom_prob(law, 0.0, 4.0) == pytest.approx(0.063776, abs=1e-6)
    assert ch.closed_form_prob(spec(), 1) == pytest.approx(0.183674, abs=1e-6)
    assert ch.closed_form_prob1(spec()) == pytest.approx(3 / 14, abs=1e-15)
    assert ch.closed_form_prob0() == 0.5


@pytest.mark.parametrize("p", [1.5, 4.0])
@pytest.mark.parametrize("K", [4.0, math.e ** 2])
@pytest.mark.parametrize("N", [2, 6, 12])
def test_enumeration_matches_closed_form(p, K, N):
    if p == 4.0 and K == math.e ** 2 and N == 2:
        with pytest.raises(ch.MalformedState):
            spec(p, K, N)
        return
    s = spec(p, K, N)
    res = ch.enumerate_chain(s)
    assert ch.max_law_difference(res.distribution, ch.closed_form_law(s)) <= 1e-12
    assert abs(res.distribution.total_mass() - 1) <= 1e-12


def test_level_path_matches_enumeration():
    s = spec(1.5, 7.0, 12, 0.2)
    a = ch.terminal_distribution(s, "enumerate")
    b = ch.level_distribution(s)
    assert ch.max_law_difference(a, b) <= 1e-13


@given(st.floats(1.1, 1.9) | st.floats(2.1, 5.0), st.floats(0.2, 4.0), st.integers(4, 40),
       st.floats(0.0, 0.09))
def test_streamed_moments_match_direct(p, lk, N, eta):
    try:
        s = ChainSpec(p, lk, N, eta)
    except ch.MalformedState:
        return
    direct = ch.lp_summary(ch.level_distribution(s), p)
    streamed = ch.chain_lp_summary(s)
    assert streamed.log_normF == pytest.approx(direct.log_normF, abs=1e-11)
    assert streamed.log_normG == pytest.approx(direct.log_normG, abs=1e-11)
    assert streamed.log_deficit == pytest.approx(direct.log_deficit, abs=1e-9)
    assert abs(ch.chain_total_log_mass(s)) <= 1e-12


def test_asymptotics_p15():
    s = ChainSpec(1.5, 2.0, 4096)
    summ = ch.chain_lp_summary(s)
    limF, limG, limD = ch.asymptotic_summary(1.5, eta=0.0, log_K=2.0)
    assert limF == pytest.approx(0.5 + 1 / 1.5 ** 0.5)
    assert limF == pytest.approx(1.31650, abs=1e-5)
    assert limD == 0.0
    assert math.exp(1.5 * summ.log_normF) == pytest.approx(limF, rel=0.01)
    assert math.exp(1.5 * summ.log_normG) == pytest.approx(limG, rel=0.01)


def test_huge_K_log_path():
    lk = ch.log_of_number("1e500")
    assert lk == pytest.approx(500 * math.log(10))
    s = ChainSpec(7.0, lk, ch.auto_N(lk, 0.001))
    summ = ch.chain_lp_summary(s)
    assert math.isfinite(summ.log_normF) and math.isfinite(summ.log_normG)
    assert abs(ch.chain_total_log_mass(s)) <= 1e-10


def test_distribution_roundtrip():
    law = ch.terminal_distribution(spec(1.5, 4.0, 6, 0.2), "enumerate")
    back = ch.TerminalDistribution.from_json(law.to_json())
    assert ch.max_law_difference(law, back) == 0.0
    assert law.to_csv().splitlines()[0] == "absF,absG,prob"


def test_invalid_specs():
    with pytest.raises(ValueError):
        ChainSpec(1.5, 1.0, 0)
    with pytest.raises(ValueError):
        ChainSpec(1.5, 1.0, 3, 0.6)
    with pytest.raises(ValueError):
        ChainSpec(1.5, -1.0, 3)


def test_sharpness_sub_recipe():
    ratios = []
    for eps in (1e-2, 1e-3):
        r = ch.sharpness_report(1.5, eps)
        assert r.norm_predicate and r.deficit_predicate
        assert r.report.passed
        ratios.append(r.deficit_ratio)
    assert min(ratios) >= 0.1


def test_sharpness_large_p_recipe():
    r = ch.sharpness_report(4.0, 1e-2, recipe="large_p")
    assert r.norm_predicate and r.deficit_predicate and r.report.passed


def test_sharpness_rejects_two():
    with pytest.raises(ch.SideConditionError):
        ch.sharpness_report(2.0, 1e-2)


def test_critical_counterexample():
    ce = ch.critical_counterexample()
    assert ce.ratio == pytest.approx(math.sqrt(2), abs=1e-12)
    assert ce.norm_X == ce.norm_Y
