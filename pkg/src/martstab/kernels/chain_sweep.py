"""Streaming p-th moments of the staircase chain's terminal law.

Sums are accumulated in log space, so ``K`` far outside the double range is
fine and no atom array is ever materialized. Per axis level ``k`` there are
two line atoms (one reached from the axis point, one through the left point
one level up); each may split into several endpoints described by
log-coefficients relative to the line value ``u``. The fixed atoms ``(1, 0)``
and ``(0, K)`` are added separately.
"""
import math

import numpy as np

from .._accel import njit, resolve_backend

NEG_INF = -np.inf


@njit(cache=True)
def _acc(m, s, x):
    # running log-sum-exp, value = m + log(s)
    if x == NEG_INF:
        return m, s
    if x <= m:
        return m, s + math.exp(x - m)
    return x, s * math.exp(m - x) + 1.0


@njit(cache=True)
def _finish(m, s):
    if s == 0.0:
        return NEG_INF
    return m + math.log(s)


@njit(cache=True)
def _moments_numba(p, N, step_log, stay_log, enter_axis, enter_left, log_p,
                   lf, lg, ld, lw, log_c, log_k):
    mF, sF = NEG_INF, 0.0
    mG, sG = NEG_INF, 0.0
    mD, sD = NEG_INF, 0.0
    mT, sT = NEG_INF, 0.0
    half = math.log(0.5)
    mF, sF = _acc(mF, sF, half)
    mD, sD = _acc(mD, sD, half + p * log_c)
    mT, sT = _acc(mT, sT, half)
    for k in range(N):
        la = half + k * stay_log
        for src in range(2):
            if src == 0:
                lp = la + enter_axis
                lu = k * step_log - log_p
            else:
                lp = la + enter_left
                lu = (k + 1) * step_log - log_p
            mT, sT = _acc(mT, sT, lp)
            for j in range(lf.shape[0]):
                w = lp + lw[j]
                mF, sF = _acc(mF, sF, w + p * (lf[j] + lu))
                mG, sG = _acc(mG, sG, w + p * (lg[j] + lu))
                if ld[j] > NEG_INF:
                    mD, sD = _acc(mD, sD, w + p * (ld[j] + lu))
    ltop = half + N * stay_log
    mT, sT = _acc(mT, sT, ltop)
    mG, sG = _acc(mG, sG, ltop + p * log_k)
    mD, sD = _acc(mD, sD, ltop + p * log_k)
    return _finish(mF, sF), _finish(mG, sG), _finish(mD, sD), _finish(mT, sT)


def _lse(chunks):
    x = np.concatenate([np.atleast_1d(np.asarray(c, dtype=float)) for c in chunks])
    x = x[x > NEG_INF]
    if x.size == 0:
        return NEG_INF
    m = x.max()
    return float(m + np.log(np.exp(x - m).sum()))


def _moments_numpy(p, N, step_log, stay_log, enter_axis, enter_left, log_p,
                   lf, lg, ld, lw, log_c, log_k, chunk=1 << 20):
    half = math.log(0.5)
    accF, accG, accD, accT = [half], [], [half + p * log_c], [half]
    for start in range(0, N, chunk):
        k = np.arange(start, min(N, start + chunk), dtype=float)
        la = half + k * stay_log
        for lp, lu in ((la + enter_axis, k * step_log - log_p),
                       (la + enter_left, (k + 1) * step_log - log_p)):
            accT.append(_lse([lp]))
            for j in range(lf.shape[0]):
                w = lp + lw[j]
                accF.append(_lse([w + p * (lf[j] + lu)]))
                accG.append(_lse([w + p * (lg[j] + lu)]))
                if ld[j] > NEG_INF:
                    accD.append(_lse([w + p * (ld[j] + lu)]))
    ltop = half + N * stay_log
    accT.append(ltop)
    accG.append(ltop + p * log_k)
    accD.append(ltop + p * log_k)
    return _lse(accF), _lse(accG), _lse(accD), _lse(accT)


def chain_log_moments(p, N, level_logs, endpoints, log_c, log_k, backend=None):
    """Logs of ``E|F|^p``, ``E|G|^p``, ``E||G| - c|F||^p`` and the total mass.

    ``level_logs`` = ``(log(1+2d), log r, log P(axis->line), log P(axis->left->line))``
    where ``r`` is the probability of climbing one axis level.
    ``endpoints`` = ``(lf, lg, ld, lw)``: per split endpoint, the logs of
    ``|F|/u``, ``|G|/u``, ``||G|-c|F||/u`` and of its conditional weight.
    """
    step_log, stay_log, ea, el = (float(v) for v in level_logs)
    lf, lg, ld, lw = (np.ascontiguousarray(v, dtype=float) for v in endpoints)
    args = (float(p), int(N), step_log, stay_log, ea, el, math.log(p),
            lf, lg, ld, lw, float(log_c), float(log_k))
    if resolve_backend(backend) == "numba":
        return tuple(float(v) for v in _moments_numba(*args))
    return _moments_numpy(*args)
