"""Brownian exit from a planar wedge: Euler steps, bridge correction, splitting.

Coordinates inside the kernel are local: the vertex is the origin and the
bisector is the positive x axis, so the wedge is ``|arg z| <= a``.

* Step size is ``max(dt * max(R, 1)^2, (c * d)^2)`` where ``d`` is the
  distance to the boundary, so steps shrink near the rays but stay
  scale-invariant far out.
* After a step that stays inside, the Brownian-bridge probability
  ``exp(-2 d0 d1 / h)`` of an unseen crossing is sampled; a hit is placed at
  the projection of the midpoint onto the nearer ray.
* A step that lands outside is cut at the ray by linear interpolation.
* Each time a path doubles its distance from the vertex it is replaced by
  ``m`` copies of weight ``w/m`` (importance splitting for the heavy tail).

Every root path seeds its own generator from ``(seed, index)``, so results do
not depend on evaluation order.
"""
import math

import numpy as np

from .._accel import njit, resolve_backend


def _simulate(a, x0, y0, n_paths, dt, seed, m_split, c_step, max_level, max_steps,
              strip_c, strip_s, strip_h, capacity):
    # strip test: |strip_c * x + strip_s * y + offset| <= strip_h in local coords
    # is folded into (strip_c, strip_s) with the offset carried by the caller
    ev_root = np.empty(capacity, np.int64)
    ev_x = np.empty(capacity)
    ev_y = np.empty(capacity)
    ev_w = np.empty(capacity)
    ev_strip = np.empty(capacity, np.bool_)
    censored = np.zeros(n_paths)
    sx = np.empty(8192)
    sy = np.empty(8192)
    sw = np.empty(8192)
    sl = np.empty(8192, np.int64)
    sk = np.empty(8192, np.bool_)
    sin_a = math.sin(a)
    cos_a = math.cos(a)
    n_ev = 0
    steps_total = 0
    overflow = False
    for i in range(n_paths):
        np.random.seed((seed * 1000003 + i) & 0x7fffffff)
        sx[0] = x0
        sy[0] = y0
        sw[0] = 1.0
        sl[0] = 0
        sk[0] = True
        top = 1
        r_start = math.sqrt(x0 * x0 + y0 * y0)
        while top > 0:
            top -= 1
            x = sx[top]
            y = sy[top]
            w = sw[top]
            lev = sl[top]
            inside_strip = sk[top]
            r_next = r_start * 2.0 ** (lev + 1)
            nst = 0
            while True:
                R = math.sqrt(x * x + y * y)
                if R >= r_next and lev < max_level and top + m_split < sx.shape[0]:
                    for _ in range(m_split):
                        sx[top] = x
                        sy[top] = y
                        sw[top] = w / m_split
                        sl[top] = lev + 1
                        sk[top] = inside_strip
                        top += 1
                    break
                phi = math.atan2(y, x)
                gap = a - abs(phi)
                d0 = R * math.sin(gap) if gap < 0.5 * math.pi else R
                hs = max(dt * max(R, 1.0) ** 2, (c_step * d0) ** 2)
                sq = math.sqrt(hs)
                x1 = x + sq * np.random.standard_normal()
                y1 = y + sq * np.random.standard_normal()
                nst += 1
                phi1 = math.atan2(y1, x1)
                gap1 = a - abs(phi1)
                exited = False
                ex = 0.0
                ey = 0.0
                if gap1 < 0.0:
                    sgn = 1.0 if phi1 >= 0.0 else -1.0
                    a0 = x * sin_a - sgn * y * cos_a
                    a1 = x1 * sin_a - sgn * y1 * cos_a
                    t = a0 / (a0 - a1) if a0 != a1 else 1.0
                    ex = x + t * (x1 - x)
                    ey = y + t * (y1 - y)
                    exited = True
                else:
                    R1 = math.sqrt(x1 * x1 + y1 * y1)
                    d1 = R1 * math.sin(gap1) if gap1 < 0.5 * math.pi else R1
                    if np.random.random() < math.exp(-2.0 * d0 * d1 / hs):
                        mx = 0.5 * (x + x1)
                        my = 0.5 * (y + y1)
                        sgn = 1.0 if my >= 0.0 else -1.0
                        ux = cos_a
                        uy = sgn * sin_a
                        pr = mx * ux + my * uy
                        if pr < 0.0:
                            pr = 0.0
                        ex = pr * ux
                        ey = pr * uy
                        exited = True
                if strip_h > 0.0 and inside_strip:
                    v = strip_c[0] * x1 + strip_c[1] * y1 + strip_s
                    if abs(v) > strip_h:
                        inside_strip = False
                x = x1
                y = y1
                if exited:
                    if n_ev >= capacity:
                        overflow = True
                    else:
                        ev_root[n_ev] = i
                        ev_x[n_ev] = ex
                        ev_y[n_ev] = ey
                        ev_w[n_ev] = w
                        ev_strip[n_ev] = inside_strip
                        n_ev += 1
                    break
                if nst > max_steps:
                    censored[i] += w
                    break
            steps_total += nst
    return (ev_root[:n_ev], ev_x[:n_ev], ev_y[:n_ev], ev_w[:n_ev], ev_strip[:n_ev],
            censored, steps_total, overflow)


_simulate_numba = njit(cache=True)(_simulate)


def simulate_exits(a, start_local, n_paths, dt, seed, m_split, c_step=0.25, max_level=60,
                   max_steps=10**6, strip=None, capacity=None, backend=None):
    """Run the wedge exit simulation.

    ``strip`` is ``((cx, cy), offset, half_width)`` describing the band
    ``|cx x + cy y + offset| <= half_width`` in local coordinates, or ``None``.
    Returns a dict of exit events (local coordinates) and diagnostics.
    """
    if strip is None:
        sc, so, sh = np.zeros(2), 0.0, 0.0
    else:
        sc, so, sh = np.asarray(strip[0], dtype=float), float(strip[1]), float(strip[2])
    cap = capacity or max(1024, 8 * n_paths)
    fn = _simulate_numba if resolve_backend(backend) == "numba" else _simulate
    while True:
        res = fn(float(a), float(start_local[0]), float(start_local[1]), int(n_paths), float(dt),
                 int(seed), int(m_split), float(c_step), int(max_level), int(max_steps),
                 sc, so, sh, int(cap))
        if not res[-1]:
            break
        cap *= 4
    root, x, y, w, in_strip, censored, steps, _ = res
    return {"root": root, "x": x, "y": y, "w": w, "strip": in_strip,
            "censored": censored, "steps": int(steps)}
