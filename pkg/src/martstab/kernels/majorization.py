"""Reduced-form majorization gaps evaluated on large grids.

Family codes:
    0  non-orthogonal, 1 < p < 2, variable s = |y| with |x| + |y| = 1
    1  non-orthogonal, p > 2,     variable s = |x| with |x| + |y| = 1
    2  orthogonal,     1 < p < 2, variable theta in [0, pi/2]
    3  orthogonal,     p > 2,     variable theta in [0, pi/2]

``params`` is a float64 vector whose layout depends on the family; it is
built by :func:`martstab.bellman.majorization_params`.
"""
import math

import numpy as np

from .._accel import njit, resolve_backend


@njit(cache=True)
def _gap_scalar(family, p, prm, t):
    if family == 0:
        a = prm[0]
        d = prm[1]
        u = p * t - 1.0
        return -a * u + (p - 1.0) ** p * t ** p - (1.0 - t) ** p + d * u * u
    if family == 1:
        a = prm[0]
        c = prm[1]
        alpha = prm[2]
        if (1.0 - t) >= (p - 2.0) * t:
            val = a * (1.0 - p * t)
        else:
            val = -c * t ** p
        rhs = (1.0 - t) ** p - (p - 1.0) ** p * t ** p + alpha * abs(1.0 - p * t) ** p
        return rhs - val
    co = math.cos(t)
    si = math.sin(t)
    if co < 0.0:
        co = 0.0
    if family == 2:
        beta = prm[0]
        kappa = prm[1]
        tg = prm[2]
        w = si - tg * co
        rhs = si ** p - tg ** p * co ** p + kappa * w * w * (co + si) ** (p - 2.0)
        return rhs + beta * math.cos(p * t)
    beta = prm[0]
    gamma = prm[1]
    mu = prm[2]
    ct = prm[3]
    edge = prm[4]
    if t >= edge:
        val = beta * math.cos(p * (0.5 * math.pi - t))
    else:
        val = -gamma * co ** p
    rhs = si ** p - ct ** p * co ** p + mu * abs(si - ct * co) ** p
    return rhs - val


@njit(cache=True)
def _gaps_numba(family, p, prm, grid):
    out = np.empty(grid.shape[0])
    for i in range(grid.shape[0]):
        out[i] = _gap_scalar(family, p, prm, grid[i])
    return out


@njit(cache=True)
def _max_gap_numba(family, p, prm, lo, hi, n):
    best = -np.inf
    arg = lo
    step = (hi - lo) / (n - 1)
    for i in range(n):
        t = lo + i * step
        if i == n - 1:
            t = hi
        g = _gap_scalar(family, p, prm, t)
        if g > best:
            best = g
            arg = t
    return best, arg


def _gaps_numpy(family, p, prm, grid):
    t = np.asarray(grid, dtype=float)
    if family == 0:
        a, d = prm[0], prm[1]
        u = p * t - 1.0
        return -a * u + (p - 1.0) ** p * t ** p - (1.0 - t) ** p + d * u * u
    if family == 1:
        a, c, alpha = prm[0], prm[1], prm[2]
        upper = (1.0 - t) >= (p - 2.0) * t
        val = np.where(upper, a * (1.0 - p * t), -c * t ** p)
        rhs = (1.0 - t) ** p - (p - 1.0) ** p * t ** p + alpha * np.abs(1.0 - p * t) ** p
        return rhs - val
    co = np.clip(np.cos(t), 0.0, None)
    si = np.sin(t)
    if family == 2:
        beta, kappa, tg = prm[0], prm[1], prm[2]
        w = si - tg * co
        rhs = si ** p - tg ** p * co ** p + kappa * w * w * (co + si) ** (p - 2.0)
        return rhs + beta * np.cos(p * t)
    beta, gamma, mu, ct, edge = prm[:5]
    val = np.where(t >= edge, beta * np.cos(p * (0.5 * np.pi - t)), -gamma * co ** p)
    rhs = si ** p - ct ** p * co ** p + mu * np.abs(si - ct * co) ** p
    return rhs - val


def gaps(family, p, prm, grid, backend=None):
    """Gap values on an explicit grid."""
    grid = np.ascontiguousarray(grid, dtype=float)
    prm = np.ascontiguousarray(prm, dtype=float)
    if resolve_backend(backend) == "numba":
        return _gaps_numba(int(family), float(p), prm, grid)
    return _gaps_numpy(int(family), float(p), prm, grid)


def max_gap(family, p, prm, lo, hi, n, backend=None, chunk=1 << 18):
    """Largest gap on ``n`` equispaced points of ``[lo, hi]`` and its location.

    The numba path streams without allocating the grid; the numpy path
    works in chunks.
    """
    prm = np.ascontiguousarray(prm, dtype=float)
    if n < 2:
        raise ValueError("need at least two grid points")
    if resolve_backend(backend) == "numba":
        best, arg = _max_gap_numba(int(family), float(p), prm, float(lo), float(hi), int(n))
        return float(best), float(arg)
    best, arg = -np.inf, lo
    step = (hi - lo) / (n - 1)
    for start in range(0, n, chunk):
        idx = np.arange(start, min(n, start + chunk))
        t = lo + idx * step
        t[idx == n - 1] = hi
        g = _gaps_numpy(int(family), float(p), prm, t)
        j = int(np.argmax(g))
        if g[j] > best:
            best, arg = float(g[j]), float(t[j])
    return best, arg
