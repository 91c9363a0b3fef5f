"""Fourier multipliers on sampled grids and exact L^p norms of power profiles.

Grid convention: ``values[iy, ix]`` sits at the cell centre
``(x, y) = (-L + (ix + 1/2) h, -L + (iy + 1/2) h)`` with ``h = 2L / n``; for
even ``n`` the origin is a shared cell corner and never a sample point.
Frequencies are the physical wavenumbers ``2 pi fftfreq(n, h)``, so the
symbol sees ``xi = (k_x, k_y)`` with the numpy DFT sign layout.
"""
from __future__ import annotations

import csv
import enum
import io
import math
import struct
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .bellman import as_exponent
from .symbols import Riesz, SymbolSpec, eval_m, named_symbol


class Regime(enum.Enum):
    SUB = "Sub"
    SUPER = "Super"


def as_regime(r) -> Regime:
    if isinstance(r, Regime):
        return r
    for m in Regime:
        if str(r).lower() in (m.value.lower(), m.name.lower()):
            return m
    raise ValueError(f"unknown regime {r!r}")


# fields --------------------------------------------------------------------

def cell_centres(n: int, L: float) -> np.ndarray:
    h = 2.0 * L / n
    return -L + (np.arange(n) + 0.5) * h


@dataclass(frozen=True)
class Field2D:
    n: int
    L: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.n, self.n):
            raise ValueError("values must be an n x n array")
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError("n must be a power of two")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def cell_area(self) -> float:
        return self.h ** 2

    def coords(self):
        c = cell_centres(self.n, self.L)
        return np.meshgrid(c, c)

    def z(self) -> np.ndarray:
        x, y = self.coords()
        return x + 1j * y

    def with_values(self, values) -> "Field2D":
        return Field2D(self.n, self.L, values)

    def to_bytes(self) -> bytes:
        head = struct.pack("<qd", self.n, self.L)
        body = np.empty(2 * self.n * self.n, dtype="<f8")
        flat = self.values.reshape(-1)
        body[0::2] = flat.real
        body[1::2] = flat.imag
        return head + body.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Field2D":
        n, L = struct.unpack_from("<qd", data, 0)
        body = np.frombuffer(data, dtype="<f8", offset=16)
        vals = (body[0::2] + 1j * body[1::2]).reshape(n, n)
        return cls(int(n), float(L), vals)

    def to_csv(self, max_n: int = 256) -> str:
        if self.n > max_n:
            raise ValueError(f"CSV export is limited to n <= {max_n}")
        x, y = self.coords()
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["x", "y", "re", "im"])
        for xv, yv, v in zip(x.ravel(), y.ravel(), self.values.ravel()):
            w.writerow([repr(float(xv)), repr(float(yv)), repr(v.real), repr(v.imag)])
        return buf.getvalue()


SymbolFn = Callable[[np.ndarray], np.ndarray]


def symbol_callable(symbol) -> SymbolFn:
    """Turn a name, :class:`Riesz`, :class:`SymbolSpec` or callable into ``xi -> m(xi)``."""
    if callable(symbol) and not isinstance(symbol, (Riesz, SymbolSpec)):
        return symbol
    if isinstance(symbol, SymbolSpec):
        return lambda xi: eval_m(symbol, xi)
    return lambda xi: named_symbol(symbol, xi)


def frequency_stack(shape: Sequence[int], L: float) -> np.ndarray:
    """Wavenumbers for a grid of the given shape on ``[-L, L]^d``, last axis = x."""
    d = len(shape)
    axes = [2.0 * math.pi * np.fft.fftfreq(n, d=2.0 * L / n) for n in shape]
    mesh = np.meshgrid(*axes, indexing="ij")
    # array axis 0 is the slowest coordinate; symbol component 0 is x
    return np.stack(mesh[::-1], axis=-1) if d > 1 else mesh[0][..., None]


def apply_symbol_nd(values: np.ndarray, L: float, symbol, pad: int = 1) -> np.ndarray:
    """Multiply the DFT of ``values`` by the symbol and transform back.

    ``pad > 1`` embeds the array in a zero field ``pad`` times wider per axis
    (same spacing) before transforming and crops afterwards.
    """
    fn = symbol_callable(symbol)
    v = np.asarray(values, dtype=complex)
    if pad > 1:
        big = np.zeros(tuple(pad * n for n in v.shape), dtype=complex)
        sl = tuple(slice((pad - 1) * n // 2, (pad - 1) * n // 2 + n) for n in v.shape)
        big[sl] = v
        out = apply_symbol_nd(big, pad * L, fn, pad=1)
        return out[sl]
    xi = frequency_stack(v.shape, L)
    m = np.asarray(fn(xi), dtype=complex).reshape(v.shape)
    zero = (slice(0, 1),) * v.ndim
    m[zero] = 0.0
    return np.fft.ifftn(np.fft.fftn(v) * m)


def apply_multiplier(field: Field2D, symbol, pad: int = 1) -> Field2D:
    return field.with_values(apply_symbol_nd(field.values, field.L, symbol, pad=pad))


def symbol_grid_max(shape, L, symbol) -> float:
    m = np.asarray(symbol_callable(symbol)(frequency_stack(shape, L)))
    return float(np.abs(m).max())


# the near-extremal family ------------------------------------------------

def check_beta(beta: float, p=None):
    if not -2.0 < beta < 0.0:
        raise ValueError("beta must lie in (-2, 0)")
    if p is not None and not beta > -2.0 / as_exponent(p).p:
        raise ValueError("beta must exceed -2/p for |z|^beta to be p-integrable")


def f_beta_value(beta: float, regime, z):
    """Pointwise values; ``z = 0`` is not evaluated (the caller avoids it)."""
    regime = as_regime(regime)
    z = np.asarray(z, dtype=complex)
    r = np.abs(z)
    inside = r < 1.0
    safe = np.where(r > 0, z, 1.0)
    ar = np.abs(safe)
    if regime is Regime.SUB:
        return np.where(inside, ar ** beta, 0.0)
    phase = safe / np.conj(safe)
    out = -2.0 / (beta + 2.0) / np.conj(safe) ** 2
    return np.where(inside, beta / (beta + 2.0) * ar ** beta * phase, out)


def closed_form_Bf_beta(beta: float, regime, z):
    """Exact image of the family under the planar Beurling transform."""
    regime = as_regime(regime)
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise ValueError("z = 0 is a singular point")
    r = np.abs(z)
    inside = r < 1.0
    if regime is Regime.SUPER:
        return np.where(inside, r ** beta, 0.0)
    return np.where(inside, beta / (beta + 2.0) * r ** beta * np.conj(z) / z,
                    -2.0 / (beta + 2.0) / z ** 2)


def _corner_cell_average(beta, harmonic, quadrant, h):
    """Mean of ``|z|^beta e^{i k phi}`` over the h-square touching the origin in a quadrant."""
    lo = 0.5 * math.pi * quadrant

    def rmax(phi):
        return h / max(abs(math.cos(phi)), abs(math.sin(phi)))

    def piece(phi, part):
        rad = rmax(phi) ** (beta + 2.0) / (beta + 2.0)
        ang = math.cos(harmonic * phi) if part == 0 else math.sin(harmonic * phi)
        return rad * ang

    mid = lo + 0.25 * math.pi
    re = sum(integrate.quad(piece, a, b, args=(0,), epsabs=0, epsrel=1e-13)[0]
             for a, b in ((lo, mid), (mid, lo + 0.5 * math.pi)))
    im = sum(integrate.quad(piece, a, b, args=(1,), epsabs=0, epsrel=1e-13)[0]
             for a, b in ((lo, mid), (mid, lo + 0.5 * math.pi)))
    return complex(re, im) / h ** 2


def _refine_cells(vals, func, n, L, near_origin, sub):
    """Replace samples by sub-sampled cell means near the origin and the unit circle."""
    h = 2.0 * L / n
    c = cell_centres(n, L)
    x, y = np.meshgrid(c, c)
    r = np.hypot(x, y)
    mask = (np.abs(r - 1.0) < 0.75 * h) | (r < near_origin * h)
    k = n // 2
    mask[k - 1:k + 1, k - 1:k + 1] = False
    offs = ((np.arange(sub) + 0.5) / sub - 0.5) * h
    ox, oy = np.meshgrid(offs, offs)
    iy, ix = np.nonzero(mask)
    for a, b in zip(iy, ix):
        vals[a, b] = np.mean(func(x[a, b] + ox + 1j * (y[a, b] + oy)))
    return vals


def _corner_cells(vals, n, L, beta, harmonic, coef):
    h = 2.0 * L / n
    k = n // 2
    for q, (iy, ix) in enumerate(((k, k), (k, k - 1), (k - 1, k - 1), (k - 1, k))):
        vals[iy, ix] = coef * _corner_cell_average(beta, harmonic, q, h)
    return vals


def f_beta_field(beta: float, regime, n: int = 1024, L: float = 4.0, p=None,
                 cell_means: bool = True, near_origin: float = 6.0, sub: int = 16) -> Field2D:
    """Samples of the family.

    The four cells meeting at the origin always hold exact cell means. With
    ``cell_means`` the cells near the origin or cut by the unit circle are
    sub-sampled as well.
    """
    check_beta(beta, p)
    regime = as_regime(regime)
    if n % 2:
        raise ValueError("n must be even so the origin is a cell corner")
    c = cell_centres(n, L)
    x, y = np.meshgrid(c, c)
    func = lambda z: f_beta_value(beta, regime, z)
    vals = np.array(func(x + 1j * y), dtype=complex)
    if cell_means:
        _refine_cells(vals, func, n, L, near_origin, sub)
    if regime is Regime.SUB:
        _corner_cells(vals, n, L, beta, 0, 1.0)
    else:
        _corner_cells(vals, n, L, beta, 2, beta / (beta + 2.0))
    return Field2D(n, L, vals)


def closed_form_field(beta: float, regime, n: int = 1024, L: float = 4.0,
                      cell_means: bool = True, near_origin: float = 6.0, sub: int = 16) -> Field2D:
    """The exact image sampled with the same cell treatment as :func:`f_beta_field`."""
    regime = as_regime(regime)
    c = cell_centres(n, L)
    x, y = np.meshgrid(c, c)
    func = lambda z: closed_form_Bf_beta(beta, regime, z)
    vals = np.array(func(x + 1j * y), dtype=complex)
    if cell_means:
        _refine_cells(vals, func, n, L, near_origin, sub)
    if regime is Regime.SUB:
        _corner_cells(vals, n, L, beta, -2, beta / (beta + 2.0))
    else:
        _corner_cells(vals, n, L, beta, 0, 1.0)
    return Field2D(n, L, vals)


def lp_norm_grid(field: Field2D, p: float) -> float:
    if p < 1:
        raise ValueError("p must be at least 1")
    return float((np.sum(np.abs(field.values) ** p) * field.cell_area) ** (1.0 / p))


def relative_l2_error(a, b) -> float:
    a = np.asarray(getattr(a, "values", a))
    b = np.asarray(getattr(b, "values", b))
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


# radial profiles ---------------------------------------------------------

ANGULAR_TAGS = ("1", "cos2", "abscos2", "e-2i")


@dataclass(frozen=True)
class RadialPiece:
    """``coef * r^power * A(phi)`` on ``r_lo <= r < r_hi``; ``A`` is named by ``tag``."""

    r_lo: float
    r_hi: float
    coef: float
    power: float
    tag: str = "1"

    def __post_init__(self):
        if self.tag not in ANGULAR_TAGS:
            raise ValueError(f"unknown angular tag {self.tag!r}")
        if not 0.0 <= self.r_lo < self.r_hi:
            raise ValueError("need 0 <= r_lo < r_hi")


@dataclass(frozen=True)
class RadialProfile:
    pieces: tuple

    def __init__(self, pieces):
        object.__setattr__(self, "pieces", tuple(pieces))


def angular_lp_integral(tag: str, p: float) -> float:
    """``int_0^{2 pi} |A(phi)|^p dphi`` by adaptive quadrature."""
    if tag in ("1", "e-2i"):
        return 2.0 * math.pi
    # |cos 2phi| has period pi/2 with kinks at its zeros
    val, _ = integrate.quad(lambda t: abs(math.cos(2.0 * t)) ** p, 0.0, 0.25 * math.pi,
                            epsabs=0, epsrel=1e-13)
    return 8.0 * val


def _radial_power_integral(a: float, r_lo: float, r_hi: float) -> float:
    # int r^a dr
    if math.isinf(r_hi):
        if a >= -1:
            raise ValueError("divergent exponent at infinity")
        return -r_lo ** (a + 1.0) / (a + 1.0)
    if r_lo == 0.0 and a <= -1:
        raise ValueError("divergent exponent at the origin")
    if a == -1:
        return math.log(r_hi / r_lo)
    return (r_hi ** (a + 1.0) - r_lo ** (a + 1.0)) / (a + 1.0)


def lp_norm_radial(profile: RadialProfile, p: float, power_p: bool = False) -> float:
    """Exact norm of a piecewise power profile (pieces must not overlap)."""
    total = 0.0
    for pc in profile.pieces:
        if pc.coef == 0.0:
            continue
        total += (abs(pc.coef) ** p * angular_lp_integral(pc.tag, p)
                  * _radial_power_integral(pc.power * p + 1.0, pc.r_lo, pc.r_hi))
    return total if power_p else total ** (1.0 / p)


def b_family_profiles(p, beta: float, regime):
    """Profiles of ``|f|``, ``|Bf|`` and ``| |Bf| - (p* - 1)|f| |`` for the family."""
    e = as_exponent(p)
    check_beta(beta, e.p)
    regime = as_regime(regime)
    c = e.p_star - 1.0
    lam = abs(beta) / (beta + 2.0)
    tail = 2.0 / (beta + 2.0)
    inf = math.inf
    if regime is Regime.SUB:
        f = [RadialPiece(0, 1, 1.0, beta)]
        bf = [RadialPiece(0, 1, lam, beta, "e-2i"), RadialPiece(1, inf, tail, -2.0, "e-2i")]
        dev = [RadialPiece(0, 1, lam - c, beta), RadialPiece(1, inf, tail, -2.0)]
    else:
        f = [RadialPiece(0, 1, lam, beta, "e-2i"), RadialPiece(1, inf, tail, -2.0, "e-2i")]
        bf = [RadialPiece(0, 1, 1.0, beta)]
        dev = [RadialPiece(0, 1, 1.0 - c * lam, beta), RadialPiece(1, inf, c * tail, -2.0)]
    return RadialProfile(f), RadialProfile(bf), RadialProfile(dev)


@dataclass(frozen=True)
class FamilyNorms:
    p: float
    beta: float
    regime: Regime
    norm_f: float
    norm_Tf: float
    deficit: float

    @property
    def ratio(self) -> float:
        return self.norm_Tf / self.norm_f

    @property
    def triple(self):
        return (self.norm_f, self.norm_Tf, self.deficit)


def b_family_norms(p, beta: float, regime=None) -> FamilyNorms:
    """Radial-oracle norms; the regime defaults to the one matching ``p``."""
    e = as_exponent(p)
    regime = as_regime(regime) if regime is not None else (Regime.SUB if e.p < 2 else Regime.SUPER)
    f, bf, dev = b_family_profiles(e, beta, regime)
    return FamilyNorms(e.p, beta, regime, lp_norm_radial(f, e.p), lp_norm_radial(bf, e.p),
                       lp_norm_radial(dev, e.p))


def beta_grid(p, n: int = 10, closest: float = 1e-4, farthest: float = 0.3) -> np.ndarray:
    """Points ``-2/p + d`` with ``d`` log-spaced from ``farthest`` down to ``closest``."""
    e = as_exponent(p)
    return -2.0 / e.p + np.geomspace(farthest, closest, n)


# Hilbert-transform family --------------------------------------------------

def hilbert_pair(a: float, b: float, x):
    """Exact pair ``(u, H u)`` from the boundary values of ``(-iz)^{-a} (1 - iz)^{-b}``.

    The function is analytic in the upper half plane, so its real and
    imaginary parts on the line are a Hilbert-transform pair for the symbol
    ``-i sgn(xi)``. The modulus is ``|x|^{-a} (1 + x^2)^{-b/2}`` and the phase is
    ``a pi/2 sgn(x) + b arctan(x)``.
    """
    x = np.asarray(x, dtype=float)
    mod = np.abs(x) ** (-a) * (1.0 + x * x) ** (-0.5 * b)
    ph = 0.5 * a * math.pi * np.sign(x) + b * np.arctan(x)
    return mod * np.cos(ph), mod * np.sin(ph)


def hilbert_family_norms(p, a: float, b: float = 1.0) -> FamilyNorms:
    """Norms of ``f``, ``Hf`` and the deficit against ``cot(pi / 2p*)``.

    Below ``p = 2`` the real part is the input; above, the imaginary part is
    the input and its transform is minus the real part.
    """
    from .stability import Variant, sharp_constant

    e = as_exponent(p)
    if not 0 < a < 1.0 / e.p or a + b <= 1.0 / e.p:
        raise ValueError("need 0 < a < 1/p and a + b > 1/p")
    c = sharp_constant(Variant.RIESZ, e)
    swap = e.p > 2

    ap = a * e.p

    def smooth(t, sgn, which):
        # integrand over |x|^{-ap}, written through the phase so t = 0 is regular
        ph = sgn * (0.5 * a * math.pi + b * math.atan(t))
        amp = (1.0 + t * t) ** (-0.5 * b)
        re, im = amp * math.cos(ph), amp * math.sin(ph)
        f, tf = (im, re) if swap else (re, im)
        if which == 0:
            return abs(f) ** e.p
        if which == 1:
            return abs(tf) ** e.p
        return abs(abs(tf) - c * abs(f)) ** e.p

    # phi = a pi/2 + b arctan t; kinks where cos, sin or |sin| - c|cos| vanish
    lo, hi = 0.5 * a * math.pi, 0.5 * a * math.pi + 0.5 * b * math.pi
    crit = [0.5 * k * math.pi for k in range(-2, 8)]
    crit += [sg * math.atan(c) + k * math.pi for sg in (-1, 1) for k in range(-1, 4)]
    kinks = sorted(math.tan((phi - lo) / b) for phi in crit if lo < phi < hi)
    edges = sorted(set([min([1.0] + kinks)] + kinks + [max([1.0] + kinks)]))

    def full(which):
        tot = 0.0
        for sgn in (-1.0, 1.0):
            near = lambda t: smooth(t, sgn, which)
            # past the first edge, integrate in log t so the slow power decay stays benign
            mid = lambda v: smooth(math.exp(v), sgn, which) * math.exp(v * (1.0 - ap))
            far = lambda t: smooth(t, sgn, which) * t ** -ap
            tot += integrate.quad(near, 0.0, edges[0], weight="alg", wvar=(-ap, 0.0),
                                  epsabs=0, epsrel=1e-11, limit=400)[0]
            for u, v in zip(edges[:-1], edges[1:]):
                tot += integrate.quad(mid, math.log(u), math.log(v),
                                      epsabs=0, epsrel=1e-11, limit=400)[0]
            tot += integrate.quad(far, edges[-1], math.inf, epsabs=0, epsrel=1e-11, limit=400)[0]
        return tot ** (1.0 / e.p)

    return FamilyNorms(e.p, a, Regime.SUB if not swap else Regime.SUPER,
                       full(0), full(1), full(2))


def hilbert_a_grid(p, n: int = 10, closest: float = 1e-3, farthest: float = 0.1) -> np.ndarray:
    e = as_exponent(p)
    return 1.0 / e.p - np.geomspace(farthest, closest, n) / e.p


# Riesz checks ------------------------------------------------------------

def riesz_square_sum(values: np.ndarray, L: float) -> np.ndarray:
    """``sum_j R_j^2`` applied to a d-dimensional grid array."""
    d = values.ndim
    out = np.zeros_like(values, dtype=complex)
    for j in range(1, d + 1):
        r = Riesz(j, d)
        out += apply_symbol_nd(apply_symbol_nd(values, L, r), L, r)
    return out


def odd_bump(n: int, L: float, d: int = 2, width: float = 0.3) -> np.ndarray:
    """``x_1 exp(-|x|^2 / 2w^2)``: smooth, effectively compact and mean-zero."""
    c = cell_centres(n, L)
    mesh = np.meshgrid(*([c] * d), indexing="ij")
    r2 = sum(m * m for m in mesh)
    return mesh[-1] * np.exp(-r2 / (2 * width ** 2))


def angular_lp_closed_form(p: float) -> float:
    """``int_0^{2 pi} |cos 2phi|^p dphi`` through the Beta function."""
    return 2.0 * math.sqrt(math.pi) * special.gamma(0.5 * (p + 1)) / special.gamma(0.5 * p + 1)
