"""Acceptance criteria, one test each.

Every test records a ``CRITERION n: PASS|FAIL  detail`` line, which is echoed
in the pytest terminal summary. Running this file directly prints the same
eleven lines without pytest.
"""
import math
import sys
import time

import numpy as np
import pytest

from martstab import angle as an
from martstab import bellman as bm
from martstab import chain as ch
from martstab import operator as op
from martstab import symbols as sy
from martstab.stability import Variant, build_report, sweep

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script from another directory
    ACCEPTANCE_LINES = {}

P_SUB_GRID = [round(1.0 + 0.05 * k, 2) for k in range(1, 20)]
P_SUPER_GRID = [round(2.0 + 0.05 * k, 2) for k in range(1, 81)]


def criterion_1():
    t0 = time.perf_counter()
    worst_gap, worst_tan, where = -math.inf, 0.0, None
    for p in P_SUB_GRID + P_SUPER_GRID:
        for fam in bm.Family:
            sw = bm.majorization_sweep(p, fam, n=1_000_000)
            if sw.max_gap > worst_gap:
                worst_gap, where = sw.max_gap, (p, fam.name)
            worst_tan = max(worst_tan, abs(sw.tangency_gap))
    elapsed = time.perf_counter() - t0
    ok = worst_gap <= 1e-10 and worst_tan <= 1e-8 and elapsed < 120
    return ok, (f"{2 * 99} sweeps of 1e6 points; max gap {worst_gap:.3e} at {where}, "
                f"max |tangency gap| {worst_tan:.3e}, {elapsed:.1f} s")


LISTED_LEMMAS = ["tech2", "te1", "te2", "te3", "te4", "te5", "au1", "au2", "au3",
                 "auxx1", "auxx2", "auxx3", "gen0", "gen2"]


def criterion_2():
    worst, arg = math.inf, None
    for name in LISTED_LEMMAS:
        grid = bm.lemma_grid(name, 1000)
        m = bm.lemma_margin(name, grid)
        i = int(np.argmin(m))
        if m[i] < worst:
            worst, arg = float(m[i]), (name, float(grid[i]))
    eq = max(abs(float(bm.lemma_margin("te1", 2.0))), abs(float(bm.lemma_margin("gen2", 2.0))))
    ok = worst >= -1e-12 and eq <= 1e-10
    return ok, f"min margin {worst:.3e} at {arg}; endpoint equality error {eq:.1e}"


def criterion_3():
    parts, ok = [], True
    for p in (1.25, 1.5, 3.0, 4.0):
        sw = bm.hessian_sample_sweep(p, 10_000, seed=1)
        ok &= sw.worst <= 1e-6 and sw.coverage >= 0.99
        parts.append(f"H[p={p}] max {sw.worst:.2e} ({sw.evaluated} pts)")
    for p in (1.5, 4.0):
        sw = bm.superharmonic_sample_sweep(p, 10_000, seed=2)
        ok &= sw.worst <= 1e-5 and sw.coverage >= 0.99
        parts.append(f"Lap[p={p}] max {sw.worst:.2e} ({sw.evaluated} pts)")
    return ok, "; ".join(parts)


def criterion_4():
    worst_law = worst_mass = worst_res = 0.0
    bad = []
    for p in (1.5, 4.0):
        for K in (4.0, math.e ** 2):
            for N in (2, 6, 12):
                try:
                    spec = ch.ChainSpec.from_K(p, K, N)
                except ch.MalformedState:
                    d = 0.5 * (K ** (1 / N) - 1)
                    bad.append(f"(p={p}, K={K:.4g}, N={N}) infeasible: (p-2)delta={(p - 2) * d:.3f} > 1")
                    continue
                res = ch.enumerate_chain(spec)
                worst_law = max(worst_law, ch.max_law_difference(res.distribution, ch.closed_form_law(spec)))
                worst_mass = max(worst_mass, abs(res.distribution.total_mass() - 1))
                worst_res = max(worst_res, res.max_martingale_residual, res.max_transform_residual,
                                res.max_prob_violation)
    ok = not bad and max(worst_law, worst_mass, worst_res) <= 1e-12
    detail = (f"{12 - len(bad)}/12 tuples: law diff {worst_law:.1e}, mass err {worst_mass:.1e}, "
              f"node residual {worst_res:.1e}")
    if bad:
        detail += "; " + "; ".join(bad)
    return ok, detail


def criterion_5():
    t0 = time.perf_counter()
    parts, ok = [], True
    for p in (1.5, 4.0):
        s = ch.chain_lp_summary(ch.ChainSpec(p, 2.0, 4096))
        limF, limG, _ = ch.asymptotic_summary(p, eta=0.0, log_K=2.0)
        rf = math.exp(p * s.log_normF) / limF - 1
        rg = math.exp(p * s.log_normG) / limG - 1
        ok &= abs(rf) <= 0.01 and abs(rg) <= 0.01
        parts.append(f"p={p}: F^p {math.exp(p * s.log_normF):.6f} vs {limF:.6f} ({rf:+.1e}), "
                     f"G^p rel {rg:+.1e}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 5
    return ok, "; ".join(parts) + f"; {elapsed:.2f} s"


def criterion_6():
    ok, parts = True, []
    ratios = []
    for eps in (1e-2, 1e-3, 1e-4):
        r = ch.sharpness_report(1.5, eps)
        ok &= r.norm_predicate and r.deficit_predicate
        ratios.append(r.deficit_ratio)
    ok &= min(ratios) >= 0.1
    parts.append(f"p=1.5 predicates ok={ok}, min deficit/(sqrt(eps)|G|) {min(ratios):.3f}")
    target = 3.0 ** 4 / 4
    for eps in (1e-2, 1e-3):
        r = ch.sharpness_report(4.0, eps, recipe="near_two", strict=False)
        this = r.norm_predicate and r.deficit_predicate and r.deficit_ratio >= target
        ok &= this
        failed = [k for k, v in r.side_conditions.items() if not v]
        parts.append(f"p=4 eps={eps} logK={r.spec.log_K:g}: |G|/|F| {r.norm_Y / r.norm_X:.5f} "
                     f"(need {3 - eps:g}), norm {'ok' if r.norm_predicate else 'FAILS'}, "
                     f"deficit ratio {r.deficit_ratio:.1f} >= {target}; side conditions failing {failed}")
    alt = ch.sharpness_report(4.0, 1e-2, recipe="large_p")
    parts.append(f"[info] p=4 alternative large-K recipe passes={alt.passed} at logK={alt.spec.log_K:.1f}")
    return ok, "; ".join(parts)


def criterion_7():
    ex = an.exit_moments_super(4.0, 0.36)
    exact = {"|Y+1|^p": ex.mYp, "|Y+1|^(p-1)": ex.mYp1, "|Y+1|^(p-2)": ex.mYp2,
             "|X|^p": ex.mXp, "X": 0.0, "Y": 0.0}
    mc = an.mc_exit(an.AngleSpecSuper(0.36), n_paths=100_000, seed=42, p=4.0)
    z = mc.z_scores(exact)
    zmax = max(abs(v) for v in z.values())
    r4 = an.sharpness_orth_report(4.0, 1e-4)
    rel = r4.norm_X / r4.extras["norm_X_asymptotic"] - 1
    r15 = an.sharpness_orth_report(1.5, 1e-3)
    a = r15.extras["a"]
    ok = zmax <= 3 and len(z) == len(exact) and abs(rel) <= 0.05 and a > 0
    return ok, (f"MC 1e5 paths seed 42: max |z| {zmax:.2f} over {len(z)} functionals; "
                f"|X| asymptotic rel err {rel:+.1e}; a = {a:.4f} at xi = pi/3 - {r15.extras['gap']:.2e}")


def criterion_8():
    rng = np.random.default_rng(8)
    worst_mod = worst_hom = 0.0
    for k in range(10):
        spec = sy.random_spec(rng, dim=2 + k % 3, n_atoms=2 + k)
        xi = rng.standard_normal((10_000, spec.dim)) * np.exp(rng.uniform(-5, 5, (10_000, 1)))
        m = sy.eval_m(spec, xi)
        worst_mod = max(worst_mod, float(np.abs(m).max()))
        t = np.exp(rng.uniform(-8, 8, (10_000, 1)))
        worst_hom = max(worst_hom, float(np.abs(sy.eval_m(spec, t * xi) - m).max()))
    probe = np.array([0.7, 0.4])
    rr = {name: sy.richardson_ratio(s, probe, 0.05)
          for name, s in (("ReB", sy.reb_spec()), ("ImB", sy.imb_spec()))}
    lev = sy.nu_kappa_spec(sy.imb_spec(), 0.5, s=-1.0)
    rate = sy.fitted_decay_rate(lev, probe, [-1.0, -2.0, -3.0, -4.0])
    target = 2 * sy.levy_exponent(lev, probe)
    ok = (worst_mod <= 1 + 1e-12 and worst_hom <= 1e-12
          and all(abs(v - 4) <= 0.4 for v in rr.values()) and abs(rate / target - 1) <= 0.01)
    return ok, (f"1e5 xi: max|m| {worst_mod:.15f}, homogeneity defect {worst_hom:.1e}; "
                f"Richardson {', '.join(f'{k} {v:.4f}' for k, v in rr.items())}; "
                f"decay rate {rate:.6f} vs 2D {target:.6f}")


def criterion_9():
    n, L, beta = 1024, 4.0, -1.2
    f = op.f_beta_field(beta, "Sub", n, L, p=1.5)
    ref = op.closed_form_field(beta, "Sub", n, L)
    r = np.abs(f.z())
    off = (r > 0.05) & (np.abs(r - 1) > 0.02)
    errs, ok = {}, True
    for name, part in (("ReB", np.real), ("ImB", np.imag)):
        out = op.apply_multiplier(f, name, pad=2).values.real
        target = part(ref.values)
        full = op.relative_l2_error(out, target)
        excised = float(np.linalg.norm((out - target)[off]) / np.linalg.norm(target[off]))
        errs[name] = (full, excised)
        ok &= full < 0.02
    bump = op.odd_bump(128, L)
    riesz = op.relative_l2_error(op.riesz_square_sum(bump, L), -bump)
    x = op.cell_centres(512, 2.0)
    g = np.exp(-(x / 0.2) ** 2) * x
    hil = float(np.abs(op.apply_symbol_nd(op.apply_symbol_nd(g, 2.0, "Hilbert"), 2.0, "Hilbert") + g).max())
    ok &= riesz <= 1e-8 and hil <= 1e-10
    return ok, ("; ".join(f"{k} rel L2 full grid {a:.2%} (outside r<0.05 and the unit circle {b:.2%})"
                          for k, (a, b) in errs.items())
                + f"; Riesz sum {riesz:.1e}; Hilbert involution {hil:.1e}")


def criterion_10():
    ok, parts = True, []
    n_rep = 0
    worst = math.inf
    for p in (1.5, 4.0):
        for regime in ("Sub", "Super"):
            fams = [op.b_family_norms(p, b, regime) for b in op.beta_grid(p)]
            res = sweep(Variant.MULTIPLIER, p, [fm.triple for fm in fams])
            ok &= res.all_pass
            n_rep += len(res.reports)
            worst = min(worst, res.worst_margin)
            rel = [fm.deficit / fm.norm_f for fm in fams]
            mono = all(a > b for a, b in zip(rel, rel[1:]))
            ok &= mono
            if not mono:
                parts.append(f"deficit not monotone for p={p} {regime}")
    for p in (1.5, 4.0):
        for eps in (1e-2, 1e-3, 1e-4):
            r = ch.sharpness_report(p, eps, strict=False)
            ok &= r.report.passed
            n_rep += 1
            worst = min(worst, r.report.margin)
    angle_sets = [(4.0, [math.pi / 8 * f for f in (0.3, 0.6, 0.9, 0.99, 0.999)], 0.0),
                  (1.5, [math.pi / 3 * f for f in (0.5, 0.7, 0.9, 0.99)], 0.05)]
    for p, xis, eta in angle_sets:
        res = sweep(Variant.MART_ORTH, p, an.angle_sweep(p, xis, eta))
        ok &= res.all_pass
        n_rep += len(res.reports)
        worst = min(worst, res.worst_margin)
    parts.insert(0, f"{n_rep} reports, worst margin {worst:.3g}")
    for p in (1.5, 4.0):
        fm = op.b_family_norms(p, -2 / p + 1e-4)
        gap = abs(fm.ratio - (max(p, p / (p - 1)) - 1))
        ok &= gap <= 1e-3
        parts.append(f"p={p} ratio {fm.ratio:.6f} (|gap| {gap:.1e}{'' if gap <= 1e-3 else ' > 1e-3'})")
    return ok, "; ".join(parts)


def criterion_11():
    ce = ch.critical_counterexample()
    marker = build_report(Variant.MART_NON_ORTH, 2.0, ce.norm_X, ce.norm_Y, ce.deficit)
    ok = abs(ce.ratio - math.sqrt(2)) <= 1e-12 and ce.norm_X == ce.norm_Y and not marker.passed
    return ok, f"ratio {ce.ratio!r}, |X|_2 = |Y|_2 = {ce.norm_X}, report marker {type(marker).__name__}"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11]


def _line(k, ok, detail):
    return f"CRITERION {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


@pytest.mark.parametrize("k", range(1, 12))
def test_criterion(k):
    ok, detail = CRITERIA[k - 1]()
    line = _line(k, ok, detail)
    ACCEPTANCE_LINES[k] = line
    print(line)
    assert ok, line


if __name__ == "__main__":
    n_fail = 0
    for k, fn in enumerate(CRITERIA, 1):
        ok, detail = fn()
        n_fail += not ok
        print(_line(k, ok, detail), flush=True)
    sys.exit(1 if n_fail else 0)
