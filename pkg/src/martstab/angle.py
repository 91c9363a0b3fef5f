"""Planar Brownian motion started at the origin and stopped on leaving a wedge.

Two wedges matter here:

* ``AngleSpecSuper(xi)``: vertex ``(0, -1)``, symmetric about the vertical
  axis, half-aperture ``xi``; the boundary is ``y + 1 = cot(xi) |x|``.
* ``AngleSpecSub(xi, eta)``: vertex ``(-1, 0)``, rays at angles ``xi - eta``
  and ``-(xi + eta)``, so the bisector is tilted by ``-eta``.

Exit laws are computed exactly: the map ``z -> z^(pi / 2a)`` sends a wedge of
aperture ``2a`` to a half-plane, where the exit density is the Poisson
kernel. Power moments ``E[R^q c_side]`` have closed forms; other functionals
are integrated numerically against the exact density. A splitting Monte
Carlo (:func:`mc_exit`) provides an independent check.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .bellman import as_exponent, orth_sharp_constant
from .kernels.wedge_mc import simulate_exits
from .stability import StabilityReport, Variant, build_report

LOWER, UPPER = -1, 1


class DomainError(ValueError):
    """Wedge parameters outside the admissible range."""


@dataclass(frozen=True)
class Wedge:
    """Wedge ``{vertex + r e^{i(bisector + phi)}: r > 0, |phi| < half_aperture}``.

    The Brownian motion starts at ``start``. ``UPPER`` is the ray at
    ``phi = +half_aperture`` and ``LOWER`` the one at ``-half_aperture``.
    """

    vertex: complex
    bisector: float
    half_aperture: float
    start: complex = 0j

    def __post_init__(self):
        if not 0 < self.half_aperture < math.pi:
            raise DomainError("half aperture must lie in (0, pi)")
        rho0, phi0 = self.start_polar
        if rho0 <= 0 or abs(phi0) >= self.half_aperture:
            raise DomainError("start point must lie strictly inside the wedge")

    @property
    def alpha(self) -> float:
        """Critical exponent: ``E R^q`` is finite exactly for ``q < alpha``."""
        return math.pi / (2.0 * self.half_aperture)

    @property
    def start_polar(self):
        z = (self.start - self.vertex) * complex(math.cos(-self.bisector), math.sin(-self.bisector))
        return abs(z), math.atan2(z.imag, z.real)

    def ray_point(self, rho, side):
        """Global coordinates of the boundary point at distance ``rho``."""
        ang = self.bisector + side * self.half_aperture
        rho = np.asarray(rho, dtype=float)
        return self.vertex.real + rho * math.cos(ang), self.vertex.imag + rho * math.sin(ang)

    def contains(self, x, y, tol=0.0):
        z = (np.asarray(x) + 1j * np.asarray(y) - self.vertex) * np.exp(-1j * self.bisector)
        return np.abs(np.angle(z)) <= self.half_aperture + tol

    # ---------------------------------------------------------------- exact
    def power_moment(self, q: float, c_lower: float = 1.0, c_upper: float = 1.0) -> float:
        """``E[R^q c_side]`` with ``R`` the exit distance from the vertex."""
        a = self.half_aperture
        if q >= self.alpha:
            return math.inf
        rho0, phi0 = self.start_polar
        A = 0.5 * (c_lower + c_upper) / math.cos(q * a)
        if q == 0.0:
            Bs = 0.5 * (c_upper - c_lower) * phi0 / a
        else:
            Bs = 0.5 * (c_upper - c_lower) / math.sin(q * a) * math.sin(q * phi0)
        return rho0 ** q * (A * math.cos(q * phi0) + Bs)

    def side_probability(self, side: int) -> float:
        return self.power_moment(0.0, float(side == LOWER), float(side == UPPER))

    def _w0(self):
        rho0, phi0 = self.start_polar
        return complex(math.cos(self.alpha * (phi0 + self.half_aperture)),
                       math.sin(self.alpha * (phi0 + self.half_aperture))), rho0

    def exit_density_u(self, u):
        """Poisson kernel on the half-plane boundary; ``u > 0`` is the lower ray."""
        w0, _ = self._w0()
        u = np.asarray(u, dtype=float)
        with np.errstate(over="ignore"):
            return w0.imag / (math.pi * ((u - w0.real) ** 2 + w0.imag ** 2))

    def rho_of_u(self, u):
        _, rho0 = self._w0()
        return rho0 * np.abs(u) ** (1.0 / self.alpha)

    def expect(self, g: Callable, lead: Optional[tuple] = None,
               breaks: Sequence[float] = (), sides=(LOWER, UPPER)) -> float:
        """``E g(X, Y)`` over the exit point, by quadrature on the exact law.

        ``g`` takes global ``(x, y)``. ``lead = (q, c_lower, c_upper)`` gives
        the large-``R`` behaviour ``c_side R^q``; it is subtracted inside the
        integral and added back in closed form. ``breaks`` are radii where
        ``g`` has kinks.
        """
        _, rho0 = self._w0()
        total = 0.0
        for side in sides:
            c_side = 0.0
            q = 0.0
            if lead is not None:
                q = lead[0]
                c_side = lead[1] if side == LOWER else lead[2]
                total += self.power_moment(q, c_side * (side == LOWER), c_side * (side == UPPER))

            def integrand(v, side=side, c_side=c_side, q=q):
                # u = sign * e^v; the weight dens * u decays like e^{-|v|}
                if abs(v) > 600.0:
                    return 0.0
                u = math.exp(v)
                rho = rho0 * u ** (1.0 / self.alpha)
                x, y = self.ray_point(rho, side)
                val = float(g(x, y))
                if c_side:
                    val -= c_side * rho ** q
                dens = float(self.exit_density_u(-side * u))
                return val * dens * u

            pts = sorted({self.alpha * math.log(b / rho0) for b in breaks if b > 0})
            edges = [-math.inf] + pts + [math.inf]
            for lo, hi in zip(edges[:-1], edges[1:]):
                val, _ = integrate.quad(integrand, lo, hi, limit=400, epsabs=1e-13, epsrel=1e-11)
                total += val
        return total

    def exit_cdf_side(self, side: int, rho: float) -> float:
        """``P(exit on side, R <= rho)``."""
        _, r0 = self._w0()
        w0, _ = self._w0()
        u = (rho / r0) ** self.alpha
        # integral of the Poisson kernel over [0, u] (lower) or [-u, 0] (upper)
        if side == LOWER:
            lo, hi = 0.0, u
        else:
            lo, hi = -u, 0.0
        F = lambda t: math.atan((t - w0.real) / w0.imag) / math.pi
        return F(hi) - F(lo)


# ---------------------------------------------------------------------------
# the two wedges


@dataclass(frozen=True)
class AngleSpecSuper:
    xi: float

    def __post_init__(self):
        if not 0 < self.xi < 0.5 * math.pi:
            raise DomainError("xi must lie in (0, pi/2)")

    @property
    def wedge(self) -> Wedge:
        return Wedge(complex(0.0, -1.0), 0.5 * math.pi, self.xi)

    def check_p(self, p: float):
        if math.cos(p * self.xi) <= 0 or p * self.xi >= 0.5 * math.pi:
            raise DomainError(f"cos(p xi) <= 0 for p={p}, xi={self.xi}: moments are infinite")


@dataclass(frozen=True)
class AngleSpecSub:
    xi: float
    eta: float

    def __post_init__(self):
        if not (0 < self.eta < self.xi and self.xi + self.eta < 0.5 * math.pi):
            raise DomainError("need 0 < eta < xi and xi + eta < pi/2")

    @property
    def wedge(self) -> Wedge:
        return Wedge(complex(-1.0, 0.0), -self.eta, self.xi)

    def check_p(self, p: float):
        if 2 * self.xi >= math.pi / p:
            raise DomainError("aperture 2 xi must be smaller than pi/p")


@dataclass(frozen=True)
class SuperMoments:
    mYp: float
    mYp1: float
    mYp2: float
    mXp: float

    def __iter__(self):
        return iter((self.mYp, self.mYp1, self.mYp2, self.mXp))


def exit_moments_super(p, xi: float) -> SuperMoments:
    """Closed-form moments of the exit point from the upright wedge.

    Returns ``E|Y+1|^p``, ``E|Y+1|^(p-1)``, ``E|Y+1|^(p-2)`` and ``E|X|^p``.
    """
    p = as_exponent(p).p
    if p <= 2:
        raise DomainError("these moments are used for p > 2")
    spec = AngleSpecSuper(xi)
    spec.check_p(p)
    c, s = math.cos(xi), math.sin(xi)
    return SuperMoments(
        c ** p / math.cos(p * xi),
        c ** (p - 1) / math.cos((p - 1) * xi),
        c ** (p - 2) / math.cos((p - 2) * xi),
        s ** p / math.cos(p * xi),
    )


# ---------------------------------------------------------------------------
# p < 2: coefficient a and the second-order expansion


def bracket_a(p, xi: float, eta: float, eps: float) -> float:
    """Numerator of the coefficient ``a`` (the expression multiplied by 1/sin 2p xi)."""
    p = as_exponent(p).p
    t = math.tan(math.pi / (2 * p) - eps) ** p
    up = math.sin(xi - eta) ** p - t * math.cos(xi - eta) ** p
    lo = math.sin(xi + eta) ** p - t * math.cos(xi + eta) ** p
    return math.sin(p * (xi + eta)) * up + math.sin(p * (xi - eta)) * lo


def coefficient_a(p, xi: float, eta: float, eps: float) -> float:
    """Coefficient of ``R^p cos(p theta)`` in the harmonic function matching
    ``|y|^p - tan^p(pi/2p - eps) |x+1|^p`` on the sub wedge; equals
    ``E|Y|^p - tan^p(pi/2p - eps) E|X+1|^p``.
    """
    p = as_exponent(p).p
    if not 1 < p < 2:
        raise DomainError("coefficient a is defined for 1 < p < 2")
    s = math.sin(2 * p * xi)
    if abs(s) < 1e-14:
        raise DomainError("sin(2 p xi) = 0: the coefficient is undefined")
    return bracket_a(p, xi, eta, eps) / s


def gen10_sides(p, eta: float, literal: bool = False):
    """Both sides of the second-order bound on the sin^p / cos^p ratio.

    ``literal=True`` uses the factor ``(p - 2)`` as printed in the source,
    which is the wrong sign below 2; the default uses ``(2 - p)``.
    """
    p = as_exponent(p).p
    c = math.pi / (2 * p)
    lhs = ((math.sin(c + eta) ** p + math.sin(c - eta) ** p)
           / (math.cos(c + eta) ** p + math.cos(c - eta) ** p))
    d = 2 * p ** 3 / (p - 1) ** p
    factor = (p - 2) if literal else (2 - p)
    rhs = math.tan(c) ** p - d * factor * eta ** 2
    return lhs, rhs


def gen10_margin(p, eta: float, literal: bool = False) -> float:
    lhs, rhs = gen10_sides(p, eta, literal)
    return lhs - rhs


# ---------------------------------------------------------------------------
# exact norms on the two wedges


def _super_breaks(xi, C):
    c, s = math.cos(xi), math.sin(xi)
    out = [1.0 / c]
    for sg in (1.0, -1.0):
        den = c - sg * C * s
        if den > 0:
            out.append(1.0 / den)
    return out


def super_norms(p, xi: float, C: Optional[float] = None):
    """Exact ``(||X||_p, ||Y||_p, || |Y| - C|X| ||_p)`` for the upright wedge."""
    p = as_exponent(p).p
    spec = AngleSpecSuper(xi)
    spec.check_p(p)
    C = orth_sharp_constant(p) if C is None else C
    w = spec.wedge
    c, s = math.cos(xi), math.sin(xi)
    mX = s ** p / math.cos(p * xi)
    mY = w.expect(lambda x, y: abs(y) ** p, lead=(p, c ** p, c ** p), breaks=[1.0 / c])
    k = abs(c - C * s) ** p
    mD = w.expect(lambda x, y: abs(abs(y) - C * abs(x)) ** p, lead=(p, k, k),
                  breaks=_super_breaks(xi, C))
    return mX ** (1 / p), mY ** (1 / p), mD ** (1 / p)


def sub_norms(p, xi: float, eta: float, C: Optional[float] = None):
    """Exact ``(||X||_p, ||Y||_p, || |Y| - C|X| ||_p, ||X+1||_p)`` for the tilted wedge."""
    p = as_exponent(p).p
    spec = AngleSpecSub(xi, eta)
    spec.check_p(p)
    C = orth_sharp_constant(p) if C is None else C
    w = spec.wedge
    th_lo, th_up = xi + eta, xi - eta     # angles of the rays (lower one below the axis)
    cl, cu = math.cos(th_lo), math.cos(th_up)
    sl, su = math.sin(th_lo), math.sin(th_up)
    mX1 = w.power_moment(p, cl ** p, cu ** p)
    mY = w.power_moment(p, sl ** p, su ** p)
    mX = w.expect(lambda x, y: abs(x) ** p, lead=(p, cl ** p, cu ** p), breaks=[1 / cl, 1 / cu])
    brk = [1 / cl, 1 / cu]
    for cc, ss in ((cl, sl), (cu, su)):
        for sg in (1.0, -1.0):
            den = C * cc - sg * ss
            if den > 0:
                brk.append(C / den)
    mD = w.expect(lambda x, y: abs(abs(y) - C * abs(x)) ** p,
                  lead=(p, abs(sl - C * cl) ** p, abs(su - C * cu) ** p), breaks=brk)
    return mX ** (1 / p), mY ** (1 / p), mD ** (1 / p), mX1 ** (1 / p)


# ---------------------------------------------------------------------------
# sharpness


def b_p(p: float) -> float:
    return math.sin(math.pi / p) / (p * (p - 2))


def super_norm_asymptotic(p, eps: float) -> float:
    """Leading small-eps behaviour of ``||X||_p`` at ``xi = pi/2p - b_p eps``."""
    p = as_exponent(p).p
    return math.sin(math.pi / (2 * p)) * (math.sin(math.pi / p) * eps / (p - 2)) ** (-1 / p)


def super_moment_bound(p, xi: float, eps: float) -> float:
    """Moment-only lower bound for ``||Y||^p - (cot(pi/2p) - eps)^p ||X||^p``."""
    p = as_exponent(p).p
    mYp, mYp1, mYp2, mXp = exit_moments_super(p, xi)
    C = orth_sharp_constant(p)
    return (mXp * (1 / math.tan(xi) ** p - (C - eps) ** p)
            - 0.5 * p * (2 * mYp1 - mYp2))


@dataclass
class OrthSharpness:
    p: float
    eps: float
    xi: float
    eta: float
    norm_X: float
    norm_Y: float
    deficit: float
    norm_predicate: bool
    deficit_predicate: bool
    deficit_ratio: float
    report: StabilityReport
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.norm_predicate and self.deficit_predicate

    def to_dict(self) -> dict:
        return {"p": self.p, "eps": self.eps, "xi": self.xi, "eta": self.eta,
                "norm_X": self.norm_X, "norm_Y": self.norm_Y, "deficit": self.deficit,
                "norm_predicate": self.norm_predicate, "deficit_predicate": self.deficit_predicate,
                "deficit_ratio": self.deficit_ratio, "extras": self.extras,
                "stability": self.report.to_dict()}


def sharpness_orth_report(p, eps: float, gap: Optional[float] = None) -> OrthSharpness:
    """Near-extremal wedge for the orthogonal constant, with exact norms.

    Above 2: ``xi = pi/2p - b_p eps`` and the predicate is
    ``||Y|| >= (cot(pi/2p) - eps) ||X||``; ``deficit_ratio`` is
    ``deficit / (eps^(1/p) ||X||)``.

    Below 2: ``eta = sqrt(eps / (2-p))`` and ``xi = pi/2p - gap``; when
    ``gap`` is not given it is shrunk geometrically until ``a > 0`` (that is,
    ``||Y|| >= tan(pi/2p - eps) ||X+1||``) and ``deficit >= (eta/2) ||X||``.
    Whether ``||Y|| >= (tan(pi/2p) - 2 eps) ||X||`` also holds is recorded in
    ``extras``.
    """
    e = as_exponent(p).require_noncritical()
    p = e.p
    if not eps > 0:
        raise DomainError("eps must be positive")
    C = orth_sharp_constant(p)
    if p > 2:
        if eps >= min(C, math.pi / (2 * p) / b_p(p)):
            raise DomainError("eps too large for the wedge recipe")
        xi = math.pi / (2 * p) - b_p(p) * eps
        nX, nY, dfc = super_norms(p, xi)
        norm_ok = nY >= (C - eps) * nX
        ratio = dfc / (eps ** (1 / p) * nX)
        report = build_report(Variant.MART_ORTH, e, nX, nY, dfc)
        extras = {"moment_bound": super_moment_bound(p, xi, eps),
                  "norm_X_asymptotic": super_norm_asymptotic(p, eps)}
        return OrthSharpness(p, eps, xi, 0.0, nX, nY, dfc, bool(norm_ok), bool(dfc > 0),
                             ratio, report, extras)
    eta = math.sqrt(eps / (2 - p))
    if eta >= math.pi / (2 * p) - 1e-6 or math.pi / (2 * p) + eta >= 0.5 * math.pi:
        raise DomainError("eps too large: eta leaves the admissible range")
    t_eps = math.tan(math.pi / (2 * p) - eps)
    gaps = [gap] if gap is not None else [eps * 0.5 ** j for j in range(60)]
    last = None
    for gp in gaps:
        xi = math.pi / (2 * p) - gp
        if xi <= eta or math.sin(2 * p * xi) < 1e-12:
            continue
        a = coefficient_a(p, xi, eta, eps)
        nX, nY, dfc, nX1 = sub_norms(p, xi, eta)
        # a > 0 is exactly ||Y||^p > tan^p(pi/2p - eps) ||X+1||^p
        norm_ok = a > 0 and nY >= t_eps * nX1
        def_ok = dfc >= 0.5 * eta * nX
        last = (xi, a, nX, nY, dfc, nX1, norm_ok, def_ok)
        if norm_ok and def_ok:
            break
    if last is None:
        raise DomainError("no admissible xi found")
    xi, a, nX, nY, dfc, nX1, norm_ok, def_ok = last
    report = build_report(Variant.MART_ORTH, e, nX, nY, dfc)
    extras = {
        "a": a,
        "gap": math.pi / (2 * p) - xi,
        "norm_X_plus_1": nX1,
        "bracket_at_critical_xi": bracket_a(p, math.pi / (2 * p), eta, eps),
        "eps_measured": report.eps,
        "deficit_over_sqrt_eps_measured": dfc / (math.sqrt(report.eps) * nX) if report.eps > 0 else math.inf,
        # the weaker-constant claim ||Y|| >= (tan(pi/2p) - 2 eps) ||X||, recorded only
        "claim_tan_minus_2eps": nY >= (C - 2 * eps) * nX,
    }
    return OrthSharpness(p, eps, xi, eta, nX, nY, dfc, bool(norm_ok), bool(def_ok),
                         dfc / (math.sqrt(eps) * nX), report, extras)


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass
class MCResult:
    """Per-root averages with standard errors (roots are i.i.d.)."""

    n_paths: int
    seed: int
    dt: float
    means: dict
    std_errors: dict
    censored_mass: float
    strip_frequency: float
    steps: int
    exit_points: tuple

    def z_scores(self, exact: dict) -> dict:
        return {k: (self.means[k] - v) / self.std_errors[k] for k, v in exact.items()
                if k in self.means and self.std_errors[k] > 0}

    def csv_row(self) -> dict:
        row = {"seed": self.seed, "n_paths": self.n_paths, "dt": self.dt,
               "censored_mass": self.censored_mass, "strip_frequency": self.strip_frequency}
        for k in self.means:
            row[k] = self.means[k]
            row[k + "_se"] = self.std_errors[k]
        return row


def default_split(wedge: Wedge) -> int:
    """Copies per radius doubling.

    A path doubles its radius with probability about ``2^-alpha``, so
    ``0.75 * 2^alpha`` copies keep the splitting tree subcritical.
    """
    return max(2, min(32, int(0.75 * 2.0 ** wedge.alpha)))


def _functionals(spec, p):
    out = {
        "|X|^p": lambda x, y: np.abs(x) ** p,
        "|Y|^p": lambda x, y: np.abs(y) ** p,
        "X": lambda x, y: x,
        "Y": lambda x, y: y,
    }
    if isinstance(spec, AngleSpecSuper):
        out["|Y+1|^p"] = lambda x, y: np.abs(y + 1) ** p
        out["|Y+1|^(p-1)"] = lambda x, y: np.abs(y + 1) ** (p - 1)
        out["|Y+1|^(p-2)"] = lambda x, y: np.abs(y + 1) ** (p - 2)
    else:
        out["|X+1|^p"] = lambda x, y: np.abs(x + 1) ** p
    return out


def mc_exit(domain, n_paths: int = 100_000, dt: float = 1e-5, seed: int = 0, p: float = 4.0,
            m_split: Optional[int] = None, c_step: float = 0.2, max_steps: int = 10**6,
            strip_half_width: float = 0.01, backend=None, functionals=None) -> MCResult:
    """Monte Carlo exit moments for an :class:`AngleSpecSuper` or :class:`AngleSpecSub`.

    ``dt`` is the smallest relative step (the step also scales with the
    distance to the boundary). Paths still running after ``max_steps`` steps
    within a radius band are counted as censored mass.
    """
    if n_paths < 1000:
        raise ValueError("n_paths must be at least 1000")
    if not 0 < dt <= 1e-4:
        raise ValueError("dt must lie in (0, 1e-4]")
    wedge = domain.wedge
    rot = complex(math.cos(-wedge.bisector), math.sin(-wedge.bisector))
    z0 = (wedge.start - wedge.vertex) * rot
    m = default_split(wedge) if m_split is None else int(m_split)
    # band |Y| <= h in global coordinates, written in local coordinates
    sb, cb = math.sin(wedge.bisector), math.cos(wedge.bisector)
    strip = ((sb, cb), wedge.vertex.imag, strip_half_width)
    ev = simulate_exits(wedge.half_aperture, (z0.real, z0.imag), n_paths, dt, seed, m,
                        c_step=c_step, max_steps=max_steps, strip=strip, backend=backend)
    zl = ev["x"] + 1j * ev["y"]
    zg = wedge.vertex + zl * np.exp(1j * wedge.bisector)
    X, Y, W, root = zg.real, zg.imag, ev["w"], ev["root"]
    funcs = functionals or _functionals(domain, p)
    means, ses = {}, {}
    for name, fn in funcs.items():
        per_root = np.bincount(root, weights=W * fn(X, Y), minlength=n_paths)
        means[name] = float(per_root.mean())
        ses[name] = float(per_root.std(ddof=1) / math.sqrt(n_paths))
    strip_mass = np.bincount(root, weights=W * ev["strip"], minlength=n_paths)
    return MCResult(n_paths, seed, dt, means, ses, float(ev["censored"].sum() / n_paths),
                    float(strip_mass.mean()), ev["steps"], (X, Y, W))


def mc_summary_csv(results: Sequence[MCResult], path=None) -> str:
    rows = [r.csv_row() for r in results]
    cols = list(dict.fromkeys(k for r in rows for k in r))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols)
    w.writeheader()
    for r in rows:
        w.writerow(r)
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


# ---------------------------------------------------------------------------
# corpus


def angle_sweep(p, xis: Sequence[float], eta: float = 0.0):
    """Exact ``(||X||, ||Y||, deficit)`` triples for a family of wedges."""
    p = as_exponent(p).p
    out = []
    for xi in xis:
        if p > 2:
            out.append(super_norms(p, xi))
        else:
            out.append(sub_norms(p, xi, eta)[:3])
    return out
