"""Multiplier symbols built from atomic measures on the sphere and on R^d.

Two families are covered:

* ``SymbolSpec``: a weighted set of directions ``theta`` with modulators
  ``psi``; the symbol is the ``<xi, theta>^2``-weighted mean of ``psi``.
* ``LevySymbolSpec``: a jump measure with atoms ``z`` and modulators ``phi``;
  the symbol is the ``(1 - cos<xi, z>)``-weighted mean of ``phi``, damped by
  ``1 - exp(2 s D(xi))`` when a finite time horizon ``s < 0`` is given.

All evaluators accept a single frequency of shape ``(d,)`` or a stack of
shape ``(..., d)`` and return a complex scalar or array accordingly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

ZERO_TOL = 1e-14
UNIT_TOL = 1e-12


def _as_freq(xi, dim):
    x = np.asarray(xi, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != dim:
        raise ValueError(f"frequency has dimension {x.shape[-1]}, expected {dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("frequency must be finite")
    return x


def _out(values, xi_ndim):
    return complex(values) if xi_ndim <= 1 else values


@dataclass(frozen=True)
class SymbolSpec:
    """Atoms ``(theta_i, w_i, psi_i)`` of a measure on the unit sphere of R^dim."""

    dim: int
    thetas: np.ndarray
    weights: np.ndarray
    psis: np.ndarray

    def __post_init__(self):
        th = np.atleast_2d(np.asarray(self.thetas, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        ps = np.atleast_1d(np.asarray(self.psis, dtype=complex))
        if self.dim < 1 or th.shape != (w.size, self.dim) or ps.size != w.size:
            raise ValueError("atom arrays have inconsistent shapes")
        if np.any(np.abs(np.linalg.norm(th, axis=1) - 1.0) > UNIT_TOL):
            raise ValueError("every theta must be a unit vector")
        if np.any(~np.isfinite(w)) or np.any(w < 0) or not np.any(w > 0):
            raise ValueError("weights must be finite, non-negative and not all zero")
        if np.any(np.abs(ps) > 1.0 + UNIT_TOL):
            raise ValueError("|psi| must not exceed 1")
        for name, arr in (("thetas", th), ("weights", w), ("psis", ps)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_atoms(cls, atoms: Sequence, dim: int | None = None) -> "SymbolSpec":
        """``atoms`` is a sequence of ``(theta, weight, psi)`` triples."""
        th = [np.asarray(a[0], dtype=float) for a in atoms]
        d = dim if dim is not None else len(th[0])
        return cls(d, np.array(th), np.array([a[1] for a in atoms], dtype=float),
                   np.array([a[2] for a in atoms], dtype=complex))

    @property
    def atoms(self):
        return [(tuple(t), float(w), complex(s))
                for t, w, s in zip(self.thetas, self.weights, self.psis)]

    def to_json(self) -> str:
        return json.dumps({
            "dim": self.dim,
            "atoms": [{"theta": list(map(float, t)), "weight": float(w),
                       "psi_re": float(s.real), "psi_im": float(s.imag)}
                      for t, w, s in zip(self.thetas, self.weights, self.psis)],
        })

    @classmethod
    def from_json(cls, text: str) -> "SymbolSpec":
        doc = json.loads(text)
        atoms = [(a["theta"], a["weight"], complex(a["psi_re"], a.get("psi_im", 0.0)))
                 for a in doc["atoms"]]
        return cls.from_atoms(atoms, dim=doc.get("dim"))


NEG_INF_S = -math.inf


@dataclass(frozen=True)
class LevySymbolSpec:
    """Jump atoms ``(z_i, mass_i, phi_i)`` and horizon ``s`` (``-inf`` for the limit)."""

    s: float
    points: np.ndarray
    masses: np.ndarray
    phis: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        z = np.atleast_2d(np.asarray(self.points, dtype=float))
        m = np.atleast_1d(np.asarray(self.masses, dtype=float))
        ph = np.atleast_1d(np.asarray(self.phis, dtype=complex))
        if z.shape[0] != m.size or ph.size != m.size:
            raise ValueError("atom arrays have inconsistent shapes")
        if not (self.s < 0 or self.s == NEG_INF_S) or math.isnan(self.s):
            raise ValueError("s must be negative or -inf")
        total = m.sum()
        if np.any(m < 0) or not (math.isfinite(total) and total > 0):
            raise ValueError("total mass must be finite and positive")
        if np.any(np.abs(ph) > 1.0 + UNIT_TOL):
            raise ValueError("|phi| must not exceed 1")
        for name, arr in (("points", z), ("masses", m), ("phis", ph)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "dim", z.shape[1])

    def with_s(self, s: float) -> "LevySymbolSpec":
        return LevySymbolSpec(s, self.points, self.masses, self.phis)


def eval_m(spec: SymbolSpec, xi):
    """Directional-mean symbol; zero where the weighting vanishes."""
    x = _as_freq(xi, spec.dim)
    # degree-0 homogeneity: rescale so tiny frequencies do not underflow
    big = np.max(np.abs(x), axis=-1, keepdims=True)
    x = x / np.where(big > 0, big, 1.0)
    proj2 = (x @ spec.thetas.T) ** 2
    den = proj2 @ spec.weights
    num = proj2 @ (spec.weights * spec.psis)
    scale = np.sum(x * x, axis=-1) * spec.weights.sum()
    zero = np.abs(den) <= ZERO_TOL * scale
    val = np.where(zero, 0.0, num / np.where(zero, 1.0, den))
    return _out(val, x.ndim)


def _one_minus_cos(t):
    # 2 sin^2(t/2) keeps full relative precision for small t
    return 2.0 * np.sin(0.5 * t) ** 2


def levy_exponent(spec: LevySymbolSpec, xi):
    """``D(xi) = sum mass (1 - cos<xi, z>)``."""
    x = _as_freq(xi, spec.dim)
    val = _one_minus_cos(x @ spec.points.T) @ spec.masses
    return float(val) if x.ndim <= 1 else val


def _levy_ratio(spec: LevySymbolSpec, x):
    t = x @ spec.points.T
    g = _one_minus_cos(t)
    den = g @ spec.masses
    num = g @ (spec.masses * spec.phis)
    scale = np.minimum(0.5 * t * t, 2.0) @ spec.masses
    zero = den <= ZERO_TOL * scale
    return np.where(zero, 0.0, num / np.where(zero, 1.0, den)), den


def eval_M_s(spec: LevySymbolSpec, xi):
    """Damped jump symbol; at ``s = -inf`` the damping factor is 1."""
    x = _as_freq(xi, spec.dim)
    ratio, den = _levy_ratio(spec, x)
    if spec.s == NEG_INF_S:
        val = ratio
    else:
        val = -np.expm1(2.0 * spec.s * den) * ratio
    return _out(val, x.ndim)


def nu_kappa_spec(base: SymbolSpec, kappa: float, s: float = NEG_INF_S) -> LevySymbolSpec:
    """Jumps of length ``kappa`` along each direction, mass ``w / kappa^2``."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    return LevySymbolSpec(s, kappa * base.thetas, base.weights / kappa ** 2, base.psis)


def nu_kappa_symbol(base: SymbolSpec, kappa: float, xi):
    return eval_M_s(nu_kappa_spec(base, kappa), xi)


# named symbols -------------------------------------------------------------

@dataclass(frozen=True)
class Riesz:
    j: int
    d: int = 2

    def __post_init__(self):
        if not 1 <= self.j <= self.d:
            raise ValueError("Riesz index must satisfy 1 <= j <= d")


NAMES = ("ReB", "ImB", "Hilbert", "B")


def _norm2(x):
    return np.sum(x * x, axis=-1)


def named_symbol(name, xi):
    """Closed-form symbols; every one of them is set to 0 at ``xi = 0``.

    ``name`` is one of ``"ReB"``, ``"ImB"``, ``"B"``, ``"Hilbert"`` or a
    :class:`Riesz` instance (``"Riesz<j>"`` strings are read as ``Riesz(j, 2)``).
    """
    if isinstance(name, str) and name.startswith("Riesz"):
        name = Riesz(int(name[5:] or 1))
    if isinstance(name, Riesz):
        x = _as_freq(xi, name.d)
        r = np.sqrt(_norm2(x))
        val = np.where(r > 0, -1j * x[..., name.j - 1] / np.where(r > 0, r, 1.0), 0.0)
        return _out(val, x.ndim)
    if name == "Hilbert":
        x = np.asarray(xi, dtype=float)
        val = -1j * np.sign(x)
        return complex(np.ravel(val)[0]) if x.size == 1 and x.ndim <= 1 else val
    x = _as_freq(xi, 2)
    r2 = _norm2(x)
    safe = np.where(r2 > 0, r2, 1.0)
    if name == "ReB":
        val = (x[..., 0] ** 2 - x[..., 1] ** 2) / safe
    elif name == "ImB":
        val = -2.0 * x[..., 0] * x[..., 1] / safe
    elif name == "B":
        val = (x[..., 0] - 1j * x[..., 1]) ** 2 / safe
    else:
        raise ValueError(f"unknown symbol {name!r}")
    return _out(np.where(r2 > 0, val, 0.0), x.ndim)


_S = 1.0 / math.sqrt(2.0)


def reb_spec(literal: bool = False) -> SymbolSpec:
    """Axis atoms. ``literal=True`` uses the sign table that yields ``-Re B``."""
    sgn = -1.0 if literal else 1.0
    return SymbolSpec.from_atoms([((1.0, 0.0), 1.0, sgn), ((0.0, 1.0), 1.0, -sgn)])


def imb_spec(literal: bool = False) -> SymbolSpec:
    """Diagonal atoms. ``literal=True`` uses equal signs, giving the constant 1."""
    up, down = (1.0, 1.0) if literal else (-1.0, 1.0)
    return SymbolSpec.from_atoms([((_S, _S), 1.0, up), ((_S, -_S), 1.0, down)])


def random_spec(rng: np.random.Generator, dim: int = 2, n_atoms: int = 4) -> SymbolSpec:
    th = rng.standard_normal((n_atoms, dim))
    th /= np.linalg.norm(th, axis=1, keepdims=True)
    w = rng.uniform(0.0, 1.0, n_atoms)
    w[0] += 0.1
    ps = rng.uniform(0.0, 1.0, n_atoms) * np.exp(2j * np.pi * rng.uniform(size=n_atoms))
    return SymbolSpec(dim, th, w, ps)


# limit diagnostics -------------------------------------------------------

def kappa_errors(base: SymbolSpec, xi, kappas) -> np.ndarray:
    target = eval_m(base, xi)
    return np.array([abs(nu_kappa_symbol(base, k, xi) - target) for k in kappas])


def richardson_ratio(base: SymbolSpec, xi, kappa: float) -> float:
    """``err(kappa) / err(kappa / 2)``; tends to 4 for a second-order limit."""
    e1, e2 = kappa_errors(base, xi, [kappa, 0.5 * kappa])
    return float(e1 / e2)


def fitted_decay_rate(spec: LevySymbolSpec, xi, s_values) -> float:
    """Least-squares slope of ``log|M_s - M_{-inf}|`` against ``|s|``, sign flipped."""
    limit = eval_M_s(spec.with_s(NEG_INF_S), xi)
    s = np.asarray(s_values, dtype=float)
    gaps = np.array([abs(eval_M_s(spec.with_s(float(v)), xi) - limit) for v in s])
    slope = np.polyfit(-s, np.log(gaps), 1)[0]
    return float(-slope)
