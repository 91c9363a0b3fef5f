"""Special functions behind the L^p stability inequalities.

Two families are implemented:

* ``U`` governs martingale pairs with ``|dG| <= |dF|`` (no orthogonality).
  For 1 < p < 2 it is Burkholder's function; for p > 2 it is glued from an
  upper piece and a lower piece along ``|y| = (p-2)|x|``.
* ``V`` governs orthogonal pairs. It is written in polar coordinates
  around the origin of the ``(|x|, y)`` half-plane.

Every scalar constant is computed through ``log1p``/``expm1`` so that the
differences of nearly equal quantities close to p = 2 keep full precision.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .kernels import majorization as _maj

HALF_PI = 0.5 * math.pi


class Regime(enum.Enum):
    SUB = "sub"
    CRITICAL = "critical"
    SUPER = "super"


class Family(enum.Enum):
    NON_ORTH = "nonorth"
    ORTH = "orth"


class ProximityError(ValueError):
    """Raised when a finite-difference stencil would touch a singular set."""


@dataclass(frozen=True)
class Exponent:
    """A validated Lebesgue exponent ``p > 1``."""

    p: float

    def __post_init__(self):
        p = float(self.p)
        if not math.isfinite(p) or p <= 1.0:
            raise ValueError(f"exponent must be a finite real > 1, got {self.p!r}")
        object.__setattr__(self, "p", p)

    @property
    def regime(self) -> Regime:
        if self.p < 2.0:
            return Regime.SUB
        if self.p > 2.0:
            return Regime.SUPER
        return Regime.CRITICAL

    @property
    def p_star(self) -> float:
        return max(self.p, self.p / (self.p - 1.0))

    @property
    def conjugate(self) -> "Exponent":
        return Exponent(self.p / (self.p - 1.0))

    def require_noncritical(self):
        if self.regime is Regime.CRITICAL:
            raise ValueError("p = 2 has no stability functions; use p != 2")
        return self


def as_exponent(p) -> Exponent:
    return p if isinstance(p, Exponent) else Exponent(p)


# ---------------------------------------------------------------------------
# constants


def one_minus_inv_pow(p, q):
    """``(1 - 1/p)**q`` via ``exp(q * log1p(-1/p))``."""
    return np.exp(q * np.log1p(-1.0 / np.asarray(p, dtype=float)))


def burkholder_a(p):
    """``p (1 - 1/p)^(p-1)``, the leading coefficient of U."""
    p = np.asarray(p, dtype=float)
    return np.exp(np.log(p) + (p - 1.0) * np.log1p(-1.0 / p))


def one_minus_a(p):
    """``1 - p (1 - 1/p)^(p-1)`` without cancellation."""
    p = np.asarray(p, dtype=float)
    return -np.expm1(np.log(p) + (p - 1.0) * np.log1p(-1.0 / p))


def lower_piece_coef(p):
    """``(p-1)^(2p-2) / p^(p-2)``, the modulus of the lower piece of U (p > 2)."""
    p = np.asarray(p, dtype=float)
    return np.exp((2.0 * p - 2.0) * np.log(p - 1.0) - (p - 2.0) * np.log(p))


def c_nonorth(p) -> float:
    """Stability factor for pairs without orthogonality."""
    p = as_exponent(p).require_noncritical().p
    if p < 2.0:
        return (p / (p - 1.0)) ** ((3.0 - p) / 2.0) / math.sqrt(float(one_minus_a(p)))
    e = math.e
    return (p - 1.0) * (2.0 * p * e / ((p - 2.0) * (e - 2.0))) ** (1.0 / p)


def c_orth(p) -> float:
    """Stability factor for orthogonal pairs and Riesz transforms."""
    p = as_exponent(p).require_noncritical().p
    if p < 2.0:
        return (math.sqrt(32.0 / math.pi) * p ** ((3.0 - p) / 2.0)
                / ((p - 1.0) ** ((4.0 - p) / 2.0) * math.sqrt(2.0 - p)))
    return (p - 1.0) * ((2.0 + math.sqrt(2.0)) * p * p / ((p - 1.0) * (p - 2.0))) ** (1.0 / p)


def alpha_p(p) -> float:
    p = float(p)
    return (p - 2.0) / (p - 1.0) * (0.5 - 1.0 / math.e)


def kappa_p(p) -> float:
    p = float(p)
    return -(p - 1.0) / 8.0 * math.tan(math.pi / (2 * p)) ** (p - 2.0) * math.cos(math.pi / p)


def beta_p(p) -> float:
    p = float(p)
    a = math.pi / (2 * p)
    if p < 2.0:
        return math.sin(a) ** (p - 1.0) / math.cos(a)
    return math.cos(a) ** (p - 1.0) / math.sin(a)


def gamma_p(p) -> float:
    p = float(p)
    a = math.pi / (2 * p)
    return math.cos(a) ** (p - 1.0) / (math.sin(a) * math.sin(math.pi / (2 * (p - 1.0))) ** (p - 1.0))


def mu_p(p) -> float:
    p = float(p)
    return (1.0 - math.sqrt(2.0) / 2.0) * (p - 2.0) / p


def orth_sharp_constant(p) -> float:
    """``cot(pi / (2 p*))``: tan(pi/2p) below 2, cot(pi/2p) above."""
    p = as_exponent(p).p
    a = math.pi / (2 * p)
    return math.tan(a) if p < 2 else 1.0 / math.tan(a)


@dataclass(frozen=True)
class Constants:
    p: float
    c_nonorth: float
    c_orth: float
    alpha_p: float
    kappa_p: float
    beta_p: float
    gamma_p: float
    mu_p: float


def constants(p) -> Constants:
    """All scalar constants at ``p``; entries that do not apply are ``nan``."""
    e = as_exponent(p).require_noncritical()
    p = e.p
    nan = float("nan")
    sub = p < 2
    return Constants(
        p=p,
        c_nonorth=c_nonorth(p),
        c_orth=c_orth(p),
        alpha_p=nan if sub else alpha_p(p),
        kappa_p=kappa_p(p) if sub else nan,
        beta_p=beta_p(p),
        gamma_p=nan if sub else gamma_p(p),
        mu_p=nan if sub else mu_p(p),
    )


# ---------------------------------------------------------------------------
# U and V


def _norms(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("x and y must have the same shape")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite input")
    if x.ndim == 0:
        return abs(float(x)), abs(float(y))
    return np.linalg.norm(x, axis=-1), np.linalg.norm(y, axis=-1)


def U_from_norms(p, ax, ay):
    """U evaluated on norms ``ax = |x|`` and ``ay = |y|`` (broadcasts)."""
    p = as_exponent(p).require_noncritical().p
    ax = np.asarray(ax, dtype=float)
    ay = np.asarray(ay, dtype=float)
    a = float(burkholder_a(p))
    if p < 2:
        return a * ((p - 1.0) * ay - ax) * (ax + ay) ** (p - 1.0)
    upper = ay >= (p - 2.0) * ax
    return np.where(upper,
                    a * (ay - (p - 1.0) * ax) * (ax + ay) ** (p - 1.0),
                    -float(lower_piece_coef(p)) * ax ** p)


def u_region(p, x, y) -> str:
    """``"single"`` for p < 2, else ``"upper"``/``"lower"`` (boundary is upper)."""
    p = as_exponent(p).require_noncritical().p
    ax, ay = _norms(x, y)
    if p < 2:
        return "single"
    return "upper" if ay >= (p - 2.0) * ax else "lower"


def eval_U(p, x, y) -> float:
    """Value of U at a pair of vectors (or reals).

    Depends on ``(|x|, |y|)`` only and is homogeneous of degree p.
    """
    ax, ay = _norms(x, y)
    return float(U_from_norms(p, ax, ay))


def V_polar(p, ax, y):
    """V on ``(|x|, y)`` arrays; ``y`` enters through ``|y|`` when p > 2."""
    p = as_exponent(p).require_noncritical().p
    ax = np.abs(np.asarray(ax, dtype=float))
    y = np.asarray(y, dtype=float)
    if p < 2:
        r = np.hypot(ax, y)
        th = np.arctan2(y, ax)
        return -beta_p(p) * r ** p * np.cos(p * th)
    ay = np.abs(y)
    r = np.hypot(ax, ay)
    th = np.arctan2(ay, ax)
    edge = HALF_PI - math.pi / (2.0 * (p - 1.0))
    return np.where(th >= edge,
                    beta_p(p) * r ** p * np.cos(p * (HALF_PI - th)),
                    -gamma_p(p) * ax ** p)


def v_region(p, x, y) -> str:
    p = as_exponent(p).require_noncritical().p
    if p < 2:
        return "single"
    th = math.atan2(abs(float(y)), abs(float(x)))
    return "cone" if th >= HALF_PI - math.pi / (2.0 * (p - 1.0)) else "lower"


def eval_V(p, x, y) -> float:
    if not (math.isfinite(float(x)) and math.isfinite(float(y))):
        raise ValueError("non-finite input")
    return float(V_polar(p, x, y))


# ---------------------------------------------------------------------------
# majorization in reduced form


def _family_code(p: float, family: Family) -> int:
    if family is Family.NON_ORTH:
        return 0 if p < 2 else 1
    return 2 if p < 2 else 3


def majorization_params(p, family: Family) -> np.ndarray:
    p = as_exponent(p).require_noncritical().p
    code = _family_code(p, family)
    if code == 0:
        return np.array([float(burkholder_a(p)), float(one_minus_a(p))])
    if code == 1:
        return np.array([float(burkholder_a(p)), float(lower_piece_coef(p)), alpha_p(p)])
    if code == 2:
        return np.array([beta_p(p), kappa_p(p), math.tan(math.pi / (2 * p))])
    return np.array([beta_p(p), gamma_p(p), mu_p(p), 1.0 / math.tan(math.pi / (2 * p)),
                     HALF_PI - math.pi / (2.0 * (p - 1.0))])


def reduced_domain(family: Family):
    return (0.0, 1.0) if family is Family.NON_ORTH else (0.0, HALF_PI)


def tangency_point(p, family: Family) -> float:
    """Where the reduced gap and its derivative vanish."""
    p = as_exponent(p).require_noncritical().p
    if family is Family.NON_ORTH:
        return 1.0 / p
    return math.pi / (2 * p) if p < 2 else HALF_PI - math.pi / (2 * p)


def majorization_gap(p, family: Family, t, backend=None):
    """Right side minus left side of the majorization, in reduced variables.

    Parameters
    ----------
    p : float or Exponent
    family : Family
        ``NON_ORTH`` uses ``t = |y|`` (p < 2) or ``t = |x|`` (p > 2) on the
        segment ``|x| + |y| = 1``. ``ORTH`` uses the polar angle ``t`` in
        ``[0, pi/2]``.
    t : float or array

    Returns
    -------
    float or ndarray
        Predicted to be ``<= 0`` everywhere.
    """
    p = as_exponent(p).require_noncritical().p
    lo, hi = reduced_domain(family)
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(arr < lo - 1e-15) or np.any(arr > hi + 1e-15):
        raise ValueError(f"reduced variable outside [{lo}, {hi}]")
    out = _maj.gaps(_family_code(p, family), p, majorization_params(p, family),
                    np.clip(arr, lo, hi), backend=backend)
    return float(out[0]) if np.ndim(t) == 0 else out


@dataclass(frozen=True)
class MajorizationSweep:
    p: float
    family: Family
    n: int
    max_gap: float
    argmax: float
    tangency: float
    tangency_gap: float


def majorization_sweep(p, family: Family, n=1_000_000, backend=None) -> MajorizationSweep:
    """Maximum reduced gap over ``n`` equispaced points plus the tangency value."""
    p = as_exponent(p).require_noncritical().p
    lo, hi = reduced_domain(family)
    code = _family_code(p, family)
    prm = majorization_params(p, family)
    best, arg = _maj.max_gap(code, p, prm, lo, hi, n, backend=backend)
    t0 = tangency_point(p, family)
    g0 = float(_maj.gaps(code, p, prm, np.array([t0]), backend=backend)[0])
    return MajorizationSweep(p, family, n, best, arg, t0, g0)


# ---------------------------------------------------------------------------
# finite-difference checks


def _fd_step(step, scale):
    return 1e-4 * max(scale, 1e-300) if step is None else float(step)


def _check_u_proximity(p, x, y, reach):
    ax, ay = _norms(x, y)
    if min(ax, ay) < reach:
        raise ProximityError(f"|x||y| = 0 set within {reach:g}")
    if p > 2:
        dist = abs(ay - (p - 2.0) * ax) / math.hypot(1.0, p - 2.0)
        if dist < reach:
            raise ProximityError(f"piece boundary |y| = (p-2)|x| within {reach:g}")


def hessian_form_U(p, x, y, h, k, step=None) -> float:
    """Second directional derivative of U along ``(h, k)`` by central differences.

    Concavity along directions with ``|k| <= |h|`` predicts a value ``<= 0``.
    """
    p = as_exponent(p).require_noncritical().p
    x, y, h, k = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (x, y, h, k))
    size = math.sqrt(float(h @ h + k @ k))
    if size == 0.0:
        return 0.0
    ax, ay = _norms(x, y)
    d = _fd_step(step, ax + ay)
    _check_u_proximity(p, x, y, 10.0 * d)
    hn, kn = h / size, k / size

    def phi(t):
        return eval_U(p, x + t * hn, y + t * kn)

    return size * size * (phi(d) - 2.0 * phi(0.0) + phi(-d)) / (d * d)


def _check_v_proximity(p, x, y, reach):
    ax, ay = abs(x), abs(y)
    if ax < reach:
        raise ProximityError(f"axis x = 0 within {reach:g}")
    if p > 2:
        if ay < reach:
            raise ProximityError(f"axis y = 0 within {reach:g}")
        edge = HALF_PI - math.pi / (2.0 * (p - 1.0))
        r = math.hypot(ax, ay)
        if r * abs(math.sin(math.atan2(ay, ax) - edge)) < reach:
            raise ProximityError(f"gluing ray within {reach:g}")


def superharmonic_defect_V(p, x, y, step=None) -> float:
    """Five-point Laplacian of V at ``(x, y)``; predicted ``<= O(step^2)``."""
    p = as_exponent(p).require_noncritical().p
    x, y = float(x), float(y)
    d = _fd_step(step, math.hypot(x, y))
    _check_v_proximity(p, x, y, 10.0 * d)
    v = lambda a, b: float(V_polar(p, a, b))
    return (v(x + d, y) + v(x - d, y) + v(x, y + d) + v(x, y - d) - 4.0 * v(x, y)) / (d * d)


def y_convexity_defect(p, family: Family, x, y, k=None, step=None) -> float:
    """Second central difference in the y-direction (predicted ``>= 0``).

    For ``NON_ORTH`` this is ``t -> U(x, y + t k)``; for ``ORTH`` it is
    ``t -> V(x, y + t)`` and ``k`` is ignored.
    """
    p = as_exponent(p).require_noncritical().p
    if family is Family.ORTH:
        x, y = float(x), float(y)
        d = _fd_step(step, math.hypot(x, y))
        _check_v_proximity(p, x, y, 10.0 * d)
        v = lambda b: float(V_polar(p, x, b))
        return (v(y + d) - 2.0 * v(y) + v(y - d)) / (d * d)
    x, y, k = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (x, y, k))
    size = float(np.linalg.norm(k))
    if size == 0.0:
        return 0.0
    ax, ay = _norms(x, y)
    d = _fd_step(step, ax + ay)
    _check_u_proximity(p, x, y, 10.0 * d)
    kn = k / size
    u = lambda t: eval_U(p, x, y + t * kn)
    return size * size * (u(d) - 2.0 * u(0.0) + u(-d)) / (d * d)


# ---------------------------------------------------------------------------
# scalar lemmas


def _sin(a):
    return np.sin(a)


def _cos(a):
    return np.cos(a)


def _lemma_funcs():
    sqrt2, sqrt3 = math.sqrt(2.0), math.sqrt(3.0)

    def q(p):
        return math.pi / (2 * p)

    def alpha(p):
        return (p - 2.0) / (p - 1.0) * (0.5 - 1.0 / math.e)

    def kappa(p):
        return -(p - 1.0) / 8.0 * np.tan(q(p)) ** (p - 2.0) * np.cos(math.pi / p)

    def mu(p):
        return (1.0 - sqrt2 / 2.0) * (p - 2.0) / p

    def te4(p):
        base = np.where(p > 2, np.exp((p - 1.0) * np.log(np.maximum(p - 2.0, 1e-300) / (p - 1.0))), 0.0)
        return 1.0 / math.e - base

    return {
        "tech2": lambda p: burkholder_a(p) * (2.0 - p) / 2.0 - one_minus_a(p),
        "te1": lambda p: one_minus_inv_pow(p, p - 1.0) - 2.0 / (p + 2.0),
        "te2": lambda p: burkholder_a(p) - 1.0 - alpha(p),
        "te3": lambda p: 0.5 - one_minus_inv_pow(p, p - 1.0),
        "te4": te4,
        "te5": lambda p: -np.expm1((p - 2.0) * np.log1p(-1.0 / p)) - (p - 2.0) / (2.0 * (p - 1.0)),
        "innt": lambda p: (-np.expm1((p - 2.0) * np.log1p(-1.0 / p))
                           - ((p - 2.0) / (p - 1.0)) ** p - alpha(p)),
        "au1": lambda p: -(p * (p - 1.0) / 2.0) * np.tan(q(p)) ** (p - 2.0) * np.cos(math.pi / p) - kappa(p),
        "au2": lambda p: (np.tan(q(p)) ** (p - 2.0) - _sin(q(p)) ** (p - 3.0) * _cos(q(p))) - kappa(p),
        "au3": lambda p: -(p * (p - 1.0) / 2.0) * np.cos(math.pi / p) - kappa(p),
        "ssam1": lambda p: _sin(q(p)) - _cos(q(p)) ** (p - 1.0) - (p - 1.0) / 8.0,
        "ssam2": lambda p: _sin(q(p)) - _cos(q(p)) ** (p - 1.0) + sqrt3 / 16.0 * np.cos(math.pi / p),
        "ge1": lambda p: _sin(q(p)) - 1.0 + (2.0 - sqrt3) * (p - 1.0),
        "ge2": lambda p: 1.0 - _cos(q(p)) ** (p - 1.0) - (2.0 - sqrt2) * (p - 1.0),
        "ge3": lambda p: _sin(q(p)) - _cos(q(p)) + np.cos(math.pi / p) / sqrt2,
        "ge4": lambda p: _cos(q(p)) - _cos(q(p)) ** (p - 1.0) - 4.0 / math.pi * (sqrt2 - 1.0) * np.cos(math.pi / p),
        "ge5": lambda p: _cos(q(p)) - _cos(q(p)) ** (p - 1.0) - 0.5 * (1.0 - 2.0 ** (2.0 - p)),
        "ge5b": lambda p: 0.5 * (1.0 - 2.0 ** (2.0 - p)) - (sqrt2 - 1.0) * (p - 2.0),
        "auxx1": lambda p: 1.0 - _sin(q(p)) ** (p - 1.0) / (
            _cos(q(p)) * _sin(math.pi / (2.0 * (p - 1.0))) ** (p - 1.0)) - mu(p),
        "auxx2": lambda p: (_cos(q(p)) ** (p - 2.0) * _sin(q(p)) ** (p - 2.0) * np.cos(math.pi / p)
                            / _sin(math.pi / (2.0 * p * (p - 1.0))) ** (p - 2.0)) - mu(p),
        "auxx3": lambda p: _cos(q(p)) ** (p - 1.0) / _sin(q(p)) - 1.0 - mu(p),
        "gen0": lambda p: np.sqrt((p - 1.0) / p) - _sin(q(p)) / _sin(math.pi / (2.0 * (p - 1.0))),
        "gen2": lambda p: _cos(q(p)) ** (p - 1.0) - 2.0 ** -0.5,
    }


LEMMAS = _lemma_funcs()

# (lower, upper, lower_open); upper ends of unbounded ranges are truncated.
LEMMA_RANGES = {
    "tech2": (1.0, 2.0, True),
    "te1": (2.0, 50.0, False), "te2": (2.0, 50.0, False), "te3": (2.0, 50.0, False),
    "te4": (2.0, 50.0, False), "te5": (2.0, 50.0, False), "innt": (2.0, 50.0, True),
    "au1": (1.0, 2.0, True), "au2": (1.0, 2.0, True), "au3": (1.0, 2.0, True),
    "ssam1": (1.0, 1.5, True), "ge1": (1.0, 1.5, True), "ge2": (1.0, 1.5, True),
    "ssam2": (1.5, 2.0, True), "ge3": (1.5, 2.0, True), "ge4": (1.5, 2.0, True),
    "ge5": (1.5, 2.0, True), "ge5b": (1.5, 2.0, True),
    "auxx1": (2.0, 50.0, False), "auxx2": (2.0, 50.0, False), "auxx3": (2.0, 50.0, False),
    "gen0": (2.0, 50.0, False), "gen2": (2.0, 50.0, False),
}


def lemma_applies(lemma_id: str, p: float) -> bool:
    lo, hi, open_lo = LEMMA_RANGES[lemma_id]
    above = p > lo if open_lo else p >= lo
    return above and p <= hi


def lemma_margin(lemma_id: str, p):
    """Greater side minus lesser side of one scalar inequality (array-friendly)."""
    return LEMMAS[lemma_id](np.asarray(p, dtype=float))


def lemma_grid(lemma_id: str, n=1000) -> np.ndarray:
    lo, hi, open_lo = LEMMA_RANGES[lemma_id]
    if open_lo:
        return lo + (hi - lo) * np.arange(1, n + 1) / n
    return np.linspace(lo, hi, n)


def lemma_suite(p):
    """``[(lemma_id, margin), ...]`` for every lemma whose range contains p."""
    p = as_exponent(p).p
    return [(name, float(lemma_margin(name, p))) for name in LEMMAS if lemma_applies(name, p)]


# ---------------------------------------------------------------------------
# random-sample sweeps


@dataclass(frozen=True)
class SampleSweep:
    p: float
    requested: int
    evaluated: int
    skipped: int
    worst: float

    @property
    def coverage(self) -> float:
        return self.evaluated / self.requested if self.requested else 0.0


def hessian_sample_sweep(p, n_samples=10_000, seed=0, dims=(1, 2, 4)) -> SampleSweep:
    """Largest ``hessian_form_U`` over random ``(x, y, h, k)`` with ``|k| <= |h|``.

    Samples too close to a non-smooth set are counted in ``skipped``.
    """
    p = as_exponent(p).require_noncritical().p
    rng = np.random.default_rng(seed)
    worst, done, skipped = -math.inf, 0, 0
    for i in range(n_samples):
        n = dims[i % len(dims)]
        x = rng.standard_normal(n) * rng.uniform(0.2, 2.0)
        y = rng.standard_normal(n) * rng.uniform(0.2, 2.0)
        h = rng.standard_normal(n)
        h /= np.linalg.norm(h)
        k = rng.standard_normal(n)
        k *= rng.uniform(0.0, 1.0) / np.linalg.norm(k)
        try:
            val = float(hessian_form_U(p, x, y, h, k))
        except ProximityError:
            skipped += 1
            continue
        done += 1
        worst = max(worst, val)
    return SampleSweep(p, n_samples, done, skipped, worst)


def superharmonic_sample_sweep(p, n_samples=10_000, seed=0, box=2.0) -> SampleSweep:
    """Largest five-point Laplacian of V over random points of ``[-box, box]^2``."""
    p = as_exponent(p).require_noncritical().p
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-box, box, size=(n_samples, 2))
    worst, done, skipped = -math.inf, 0, 0
    for x, y in pts:
        try:
            val = superharmonic_defect_V(p, x, y)
        except ProximityError:
            skipped += 1
            continue
        done += 1
        worst = max(worst, val)
    return SampleSweep(p, n_samples, done, skipped, worst)
