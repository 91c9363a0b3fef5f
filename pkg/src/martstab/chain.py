"""A staircase Markov martingale that nearly attains the constant ``p* - 1``.

The pair ``(F, G)`` starts at the origin, moves to ``(1/2, -1/2)`` or
``(-1/2, 1/2)``, and then climbs the ``g`` axis level by level
(``y_k = (1 + 2 delta)^k``) until it is caught by one of the lines
``|g| = (p-1)|f|`` or reaches ``(0, K)``. ``G`` is the transform of ``F`` by
``(-1)^n``. With ``eta > 0`` every point caught on a line waits one step and
then splits into ``((1 -+ eta) u, (p-1) u +- eta u)``.

All probabilities are obtained by solving the two-point martingale equation
at each node. The exact terminal law is produced by forward enumeration; a
level-indexed log-space construction and a streaming moment kernel handle
``K`` far outside floating-point range.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .bellman import Exponent, Regime, as_exponent
from .kernels.chain_sweep import chain_log_moments
from .stability import StabilityReport, Variant, build_report

NEG_INF = -math.inf


class MalformedState(ValueError):
    """No probability in [0, 1] solves the martingale equation at this state."""


class SideConditionError(ValueError):
    """``eps`` (or ``p``) is outside the range where a sharpness recipe is valid."""


class Phase(enum.Enum):
    FIRST_STAGE = "FirstStage"
    WAIT_SPLIT = "WaitSplit"
    ABSORBED = "Absorbed"


class Node(enum.Enum):
    ORIGIN = "origin"
    DIAGONAL = "diagonal"   # (y, -y)
    AXIS = "axis"           # (0, y)
    LEFT = "left"           # (-delta y, y + delta y)
    LINE = "line"           # (+-u, (p-1) u) up to the sign of y
    SPLIT = "split"         # second-stage endpoint
    TERMINAL = "terminal"   # (2y, 0) or (0, K)


def log_of_number(value) -> float:
    """Natural log of a positive number given as float, int, str or Decimal.

    Strings such as ``"1e500"`` are parsed exactly so huge ``K`` never
    overflows.
    """
    if isinstance(value, (str, Decimal)):
        d = Decimal(value)
        if d <= 0:
            raise ValueError("value must be positive")
        return float(d.ln())
    if isinstance(value, int):
        if value <= 0:
            raise ValueError("value must be positive")
        return math.log(value)
    v = float(value)
    if not v > 0:
        raise ValueError("value must be positive")
    if math.isinf(v):
        raise OverflowError("value overflows a double; pass it as a string or give log_K")
    return math.log(v)


def _log(x: float) -> float:
    return math.log(x) if x > 1e-15 else NEG_INF


@dataclass(frozen=True)
class ChainSpec:
    """Parameters of the chain. ``K`` is stored through ``log_K``."""

    p: Exponent
    log_K: float
    N: int
    eta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "p", as_exponent(self.p))
        lk = float(self.log_K)
        if not (math.isfinite(lk) and lk > 0):
            raise ValueError("K must be a finite number > 1")
        object.__setattr__(self, "log_K", lk)
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        object.__setattr__(self, "N", int(self.N))
        eta = float(self.eta)
        if not (0.0 <= eta < min(1.0, self.p.p - 1.0)):
            raise ValueError("eta must satisfy 0 <= eta < min(1, p-1)")
        object.__setattr__(self, "eta", eta)
        if (self.p.p - 2.0) * self.delta > 1.0 + 1e-12:
            raise MalformedState(
                "(p-2)*delta > 1: the left point cannot be split with probabilities in [0, 1]; "
                "increase N")

    @classmethod
    def from_K(cls, p, K, N, eta=0.0) -> "ChainSpec":
        return cls(as_exponent(p), log_of_number(K), N, eta)

    @property
    def delta(self) -> float:
        return 0.5 * math.expm1(self.log_K / self.N)

    @property
    def K(self) -> float:
        return math.exp(self.log_K) if self.log_K < 709.0 else math.inf

    @property
    def step_log(self) -> float:
        """``log(1 + 2 delta)``."""
        return self.log_K / self.N

    def level_value(self, k: int) -> float:
        """``y_k = (1 + 2 delta)^k``; the same expression is used everywhere."""
        return math.exp(k * self.step_log)

    # one-step probabilities written in closed form
    def log_level_probs(self):
        """Logs of P(axis->line), P(axis->left), P(left->axis up), P(left->line)."""
        p, d = self.p.p, self.delta
        pd = p * d
        return (
            math.log(pd) - math.log1p(pd),
            -math.log1p(pd),
            _log(1.0 - (p - 2.0) * d) - math.log1p(2.0 * d),
            math.log(pd) - math.log1p(2.0 * d),
        )

    def log_climb(self) -> float:
        """Log of the probability of moving from one axis level to the next."""
        _, a, b, _ = self.log_level_probs()
        return a + b

    def to_dict(self) -> dict:
        return {"p": self.p.p, "log_K": self.log_K, "N": self.N, "eta": self.eta,
                "delta": self.delta}


@dataclass(frozen=True)
class ChainState:
    f: float
    g: float
    step: int = 0
    phase: Phase = Phase.FIRST_STAGE
    node: Node = Node.ORIGIN
    level: int = -1

    @property
    def step_parity(self) -> int:
        return self.step % 2

    def key(self):
        return (self.node, self.phase, self.level, self.f, self.g)


def initial_state() -> ChainState:
    return ChainState(0.0, 0.0, 0, Phase.FIRST_STAGE, Node.ORIGIN, -1)


def _two_point(df1: float, df2: float, scale: float = 1.0) -> float:
    """Weight ``q`` of the first move so that ``q df1 + (1-q) df2 = 0``.

    Moves shorter than ``1e-12 * scale`` count as zero, which covers the
    boundary case ``(p-2) delta = 1`` where one weight vanishes.
    """
    tol = 1e-12 * scale
    if abs(df2) <= tol:
        return 0.0 if abs(df1) > tol else 0.5
    if abs(df1) <= tol:
        return 1.0
    if df1 * df2 > 0:
        raise MalformedState("both moves point the same way; no martingale weights exist")
    return -df2 / (df1 - df2)


def _sign(x: float) -> float:
    return 1.0 if x >= 0 else -1.0


def transitions(spec: ChainSpec, state: ChainState):
    """Successor states with their probabilities.

    Every move satisfies ``dg = (-1)^(n+1) df`` where ``n`` is the step of
    ``state``; a waiting move has ``df = dg = 0``.
    """
    if state.phase is Phase.ABSORBED:
        raise ValueError("absorbed state has no transitions")
    p, d, eta = spec.p.p, spec.delta, spec.eta
    n1 = state.step + 1
    f, g = state.f, state.g

    def st(nf, ng, phase, node, level):
        return ChainState(nf, ng, n1, phase, node, level)

    def landing(nf, ng, level):
        phase = Phase.WAIT_SPLIT if eta > 0 else Phase.ABSORBED
        return st(nf, ng, phase, Node.LINE, level)

    node = state.node
    if node is Node.ORIGIN:
        return [(st(0.5, -0.5, Phase.FIRST_STAGE, Node.DIAGONAL, -1), 0.5),
                (st(-0.5, 0.5, Phase.FIRST_STAGE, Node.DIAGONAL, -1), 0.5)]
    if node is Node.DIAGONAL:
        y = f
        a = st(2.0 * y, 0.0, Phase.ABSORBED, Node.TERMINAL, -1)
        b = st(0.0, -2.0 * y, Phase.FIRST_STAGE, Node.AXIS, 0)
        q = _two_point(a.f - f, b.f - f)
        return [(a, q), (b, 1.0 - q)]
    if node is Node.AXIS:
        k = state.level
        y = _sign(g) * spec.level_value(k)
        line = landing(y / p, (p - 1.0) * y / p, k)
        left = st(-d * y, y + d * y, Phase.FIRST_STAGE, Node.LEFT, k)
        q = _two_point(line.f - f, left.f - f, abs(y))
        return [(line, q), (left, 1.0 - q)]
    if node is Node.LEFT:
        k = state.level
        s = _sign(g)
        y1 = s * spec.level_value(k + 1)
        if k + 1 >= spec.N:
            up = st(0.0, y1, Phase.ABSORBED, Node.TERMINAL, k + 1)
        else:
            up = st(0.0, y1, Phase.FIRST_STAGE, Node.AXIS, k + 1)
        line = landing(-y1 / p, (p - 1.0) * y1 / p, k + 1)
        q = _two_point(up.f - f, line.f - f, abs(y1))
        return [(up, q), (line, 1.0 - q)]
    if node is Node.LINE and state.phase is Phase.WAIT_SPLIT:
        sf, sg = _sign(f), _sign(g)
        v = -1.0 if n1 % 2 else 1.0
        if -sf * sg != v:
            return [(st(f, g, Phase.WAIT_SPLIT, Node.LINE, state.level), 1.0)]
        u = abs(f)
        a = st(sf * (u - eta * u), sg * ((p - 1.0) * u + eta * u), Phase.ABSORBED, Node.SPLIT, state.level)
        b = st(sf * (u + eta * u), sg * ((p - 1.0) * u - eta * u), Phase.ABSORBED, Node.SPLIT, state.level)
        q = _two_point(a.f - f, b.f - f)
        return [(a, q), (b, 1.0 - q)]
    raise MalformedState(f"state {state} matches no reachable pattern")


# ---------------------------------------------------------------------------
# terminal law


@dataclass
class TerminalDistribution:
    """Atoms of ``(|F_inf|, |G_inf|)`` stored as logs (``-inf`` encodes 0)."""

    log_absF: np.ndarray
    log_absG: np.ndarray
    log_prob: np.ndarray

    def __post_init__(self):
        self.log_absF = np.asarray(self.log_absF, dtype=float)
        self.log_absG = np.asarray(self.log_absG, dtype=float)
        self.log_prob = np.asarray(self.log_prob, dtype=float)

    @classmethod
    def from_atoms(cls, atoms):
        a = np.asarray(list(atoms), dtype=float).reshape(-1, 3)
        with np.errstate(divide="ignore"):
            return cls(np.log(a[:, 0]), np.log(a[:, 1]), np.log(a[:, 2]))

    @property
    def absF(self):
        return np.exp(self.log_absF)

    @property
    def absG(self):
        return np.exp(self.log_absG)

    @property
    def prob(self):
        return np.exp(self.log_prob)

    def __len__(self):
        return self.log_prob.size

    @property
    def atoms(self):
        return list(zip(self.absF.tolist(), self.absG.tolist(), self.prob.tolist()))

    def total_mass(self) -> float:
        return float(np.exp(logsumexp(self.log_prob)))

    def nonzero(self) -> "TerminalDistribution":
        keep = self.log_prob > NEG_INF
        return TerminalDistribution(self.log_absF[keep], self.log_absG[keep], self.log_prob[keep])

    def sorted(self) -> "TerminalDistribution":
        order = np.lexsort((self.log_absG, self.log_absF))
        return TerminalDistribution(self.log_absF[order], self.log_absG[order], self.log_prob[order])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["absF", "absG", "prob"])
        for row in self.atoms:
            w.writerow([repr(x) for x in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def to_json(self, path=None) -> str:
        def enc(arr):
            return [None if x == NEG_INF else float(x) for x in arr]

        text = json.dumps({
            "atoms": [{"absF": a, "absG": b, "prob": c} for a, b, c in self.atoms],
            "log_absF": enc(self.log_absF),
            "log_absG": enc(self.log_absG),
            "log_prob": enc(self.log_prob),
        }, allow_nan=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, text: str) -> "TerminalDistribution":
        data = json.loads(text)

        def dec(arr):
            return np.array([NEG_INF if x is None else x for x in arr], dtype=float)

        return cls(dec(data["log_absF"]), dec(data["log_absG"]), dec(data["log_prob"]))


@dataclass
class EnumerationResult:
    distribution: TerminalDistribution
    max_martingale_residual: float
    max_transform_residual: float
    max_prob_violation: float
    depth: int
    transitions_checked: int


def enumerate_chain(spec: ChainSpec, max_steps: Optional[int] = None) -> EnumerationResult:
    """Forward enumeration of the reachable graph with per-node checks.

    States reached at the same time with identical coordinates and tags are
    merged with compensated (``math.fsum``) summation. Residuals are relative
    to the coordinate scale of the node.
    """
    if spec.log_K > 700.0:
        raise OverflowError("coordinates overflow; use terminal_distribution(..., method='levels')")
    limit = max_steps if max_steps is not None else 2 * spec.N + 10
    frontier = {initial_state().key(): (initial_state(), [1.0])}
    terminal: dict = {}
    mart = trans = pviol = 0.0
    checked = 0
    depth = 0
    while frontier:
        if depth > limit:
            raise RuntimeError("enumeration did not terminate within the step limit")
        nxt: dict = {}
        for state, plist in frontier.values():
            mass = math.fsum(plist)
            moves = transitions(spec, state)
            scale = max(1.0, abs(state.f), abs(state.g))
            v = -1.0 if (state.step + 1) % 2 else 1.0
            mf = math.fsum(q * (s.f - state.f) for s, q in moves)
            mg = math.fsum(q * (s.g - state.g) for s, q in moves)
            mart = max(mart, abs(mf) / scale, abs(mg) / scale)
            pviol = max(pviol, abs(math.fsum(q for _, q in moves) - 1.0))
            for s, q in moves:
                checked += 1
                if q == 0.0:
                    continue
                df, dg = s.f - state.f, s.g - state.g
                trans = max(trans, abs(dg - v * df) / scale)
                if s.phase is Phase.ABSORBED:
                    terminal.setdefault((abs(s.f), abs(s.g)), []).append(mass * q)
                    depth = max(depth, s.step)
                else:
                    k = s.key()
                    if k in nxt:
                        nxt[k][1].append(mass * q)
                    else:
                        nxt[k] = (s, [mass * q])
        frontier = nxt
    items = sorted((k, math.fsum(v)) for k, v in terminal.items())
    dist = TerminalDistribution.from_atoms((a, b, c) for (a, b), c in items)
    return EnumerationResult(dist, mart, trans, pviol, depth, checked)


def level_distribution(spec: ChainSpec) -> TerminalDistribution:
    """Terminal law assembled level by level in log space (any ``K``)."""
    p, N, eta = spec.p.p, spec.N, spec.eta
    to_line, to_left, up, left_line = spec.log_level_probs()
    k = np.arange(N + 1, dtype=float)
    climb = to_left + up
    la = math.log(0.5) + (k * climb if climb > NEG_INF else np.where(k == 0, 0.0, NEG_INF))
    from_axis = np.full(N + 1, NEG_INF)
    from_axis[:N] = la[:N] + to_line
    from_left = np.full(N + 1, NEG_INF)
    from_left[1:] = la[:N] + to_left + left_line
    with np.errstate(invalid="ignore"):
        lp_line = np.logaddexp(from_axis, from_left)
    lu = k * spec.step_log - math.log(p)
    lf_parts, lg_parts, lp_parts = [[0.0]], [[NEG_INF]], [[math.log(0.5)]]
    if eta == 0.0:
        lf_parts.append(lu)
        lg_parts.append(lu + math.log(p - 1.0))
        lp_parts.append(lp_line)
    else:
        for sgn in (-1.0, 1.0):
            lf_parts.append(lu + math.log1p(sgn * eta))
            lg_parts.append(lu + math.log(p - 1.0 - sgn * eta))
            lp_parts.append(lp_line - math.log(2.0))
    lf_parts.append([NEG_INF])
    lg_parts.append([spec.log_K])
    lp_parts.append([la[N]])
    return TerminalDistribution(np.concatenate(lf_parts), np.concatenate(lg_parts),
                                np.concatenate(lp_parts)).nonzero().sorted()


def terminal_distribution(spec: ChainSpec, method: str = "auto") -> TerminalDistribution:
    """Exact terminal law.

    ``method="enumerate"`` walks the state graph forward (coordinates must
    fit in a double); ``"levels"`` assembles the same atoms per axis level in
    log space. ``"auto"`` enumerates when ``log K <= 700`` and ``N <= 2**16``.
    """
    if method == "auto":
        method = "enumerate" if spec.log_K <= 700.0 and spec.N <= 1 << 16 else "levels"
    if method == "enumerate":
        return enumerate_chain(spec).distribution
    if method == "levels":
        return level_distribution(spec)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# closed forms


def _pow_log(n: int, lr: float) -> float:
    return 0.0 if n == 0 else n * lr


def _log_ratio(spec: ChainSpec) -> float:
    p, d = spec.p.p, spec.delta
    return _log(1.0 - (p - 2.0) * d) - math.log1p(p * d) - math.log1p(2.0 * d)


def closed_form_prob0() -> float:
    return 0.5


def closed_form_prob1(spec: ChainSpec) -> float:
    """Mass of the first line atom ``(1/p, (p-1)/p)`` (summed over the split)."""
    pd = spec.p.p * spec.delta
    return 0.5 * pd / (pd + 1.0)


def closed_form_log_prob(spec: ChainSpec, k: int) -> float:
    if isinstance(k, bool) or int(k) != k or not 1 <= k <= spec.N - 1:
        raise ValueError(f"k must be an integer in [1, N-1] = [1, {spec.N - 1}]")
    p, d = spec.p.p, spec.delta
    pd = p * d
    lead = math.log(0.5) + _pow_log(k - 1, _log_ratio(spec)) + math.log(pd) - math.log1p(pd) - math.log1p(2 * d)
    return lead + math.log1p((1.0 - (p - 2.0) * d) / (1.0 + pd))


def closed_form_prob(spec: ChainSpec, k: int) -> float:
    """Total mass of the line atom at level ``k`` (``1 <= k <= N-1``).

    With ``eta > 0`` this mass is shared equally by the two split endpoints.
    """
    return math.exp(closed_form_log_prob(spec, k))


def closed_form_log_prob3(spec: ChainSpec) -> float:
    return math.log(0.5) + _pow_log(spec.N, _log_ratio(spec))


def closed_form_prob3(spec: ChainSpec) -> float:
    """Mass of the atom ``(0, K)``."""
    return math.exp(closed_form_log_prob3(spec))


def closed_form_log_top_line(spec: ChainSpec) -> float:
    """Log-mass of the line atom at level ``N`` (``(K/p, (p-1)K/p)``).

    It is reached only through the left point of level ``N-1``.
    """
    p, d = spec.p.p, spec.delta
    pd = p * d
    return (math.log(0.5) + _pow_log(spec.N - 1, _log_ratio(spec)) - math.log1p(pd)
            + math.log(pd) - math.log1p(2 * d))


def closed_form_top_line(spec: ChainSpec) -> float:
    return math.exp(closed_form_log_top_line(spec))


def closed_form_law(spec: ChainSpec) -> TerminalDistribution:
    """The terminal law rebuilt only from the closed-form masses."""
    p, eta, N = spec.p.p, spec.eta, spec.N
    lines = [(0, math.log(closed_form_prob1(spec)))]
    lines += [(k, closed_form_log_prob(spec, k)) for k in range(1, N)]
    lines.append((N, closed_form_log_top_line(spec)))
    lf, lg, lp = [0.0], [NEG_INF], [math.log(0.5)]
    for k, lpk in lines:
        lu = k * spec.step_log - math.log(p)
        if eta == 0.0:
            lf.append(lu)
            lg.append(lu + math.log(p - 1.0))
            lp.append(lpk)
        else:
            for sgn in (-1.0, 1.0):
                lf.append(lu + math.log1p(sgn * eta))
                lg.append(lu + math.log(p - 1.0 - sgn * eta))
                lp.append(lpk - math.log(2.0))
    lf.append(NEG_INF)
    lg.append(spec.log_K)
    lp.append(closed_form_log_prob3(spec))
    lp = [NEG_INF if math.isnan(x) else x for x in lp]
    return TerminalDistribution(lf, lg, lp).nonzero().sorted()


def max_law_difference(a: TerminalDistribution, b: TerminalDistribution, digits: int = 9) -> float:
    """Largest probability mismatch after pairing atoms by rounded log-coordinates."""
    def table(d):
        out = {}
        for lf, lg, lp in zip(d.log_absF, d.log_absG, d.log_prob):
            key = (round(float(lf), digits) if math.isfinite(lf) else lf,
                   round(float(lg), digits) if math.isfinite(lg) else lg)
            out[key] = out.get(key, 0.0) + math.exp(lp)
        return out
    ta, tb = table(a), table(b)
    return max(abs(ta.get(k, 0.0) - tb.get(k, 0.0)) for k in set(ta) | set(tb))


# ---------------------------------------------------------------------------
# norms


@dataclass(frozen=True)
class LpSummary:
    """``||F||_p``, ``||G||_p`` and ``|| |G| - c|F| ||_p`` with their logs."""

    log_normF: float
    log_normG: float
    log_deficit: float
    c: float

    @property
    def normF(self) -> float:
        return math.exp(self.log_normF)

    @property
    def normG(self) -> float:
        return math.exp(self.log_normG)

    @property
    def deficit(self) -> float:
        return math.exp(self.log_deficit)

    def __iter__(self):
        return iter((self.normF, self.normG, self.deficit))


def _log_abs_diff(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m = np.maximum(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = m + np.log(np.abs(np.exp(a - m) - np.exp(b - m)))
    out[np.isneginf(m)] = NEG_INF
    return out


def lp_summary(dist: TerminalDistribution, p, c: Optional[float] = None) -> LpSummary:
    """Norms of a terminal law; ``c`` defaults to ``p - 1``."""
    p = as_exponent(p).p
    c = p - 1.0 if c is None else float(c)
    lp = dist.log_prob
    lF = logsumexp(lp + p * dist.log_absF) / p
    lG = logsumexp(lp + p * dist.log_absG) / p
    ld = _log_abs_diff(dist.log_absG, math.log(c) + dist.log_absF)
    lD = logsumexp(lp + p * ld) / p
    return LpSummary(float(lF), float(lG), float(lD), c)


def chain_lp_summary(spec: ChainSpec, c: Optional[float] = None, backend=None) -> LpSummary:
    """Same as ``lp_summary(terminal_distribution(spec))`` but streamed.

    Memory use is constant in ``N``.
    """
    p, eta = spec.p.p, spec.eta
    c = p - 1.0 if c is None else float(c)
    to_line, to_left, up, left_line = spec.log_level_probs()
    level_logs = (spec.step_log, to_left + up, to_line, to_left + left_line)
    if eta == 0.0:
        lf, lg, lw = [0.0], [math.log(p - 1.0)], [0.0]
        ld = [_log(abs(p - 1.0 - c))]
    else:
        lf = [math.log1p(-eta), math.log1p(eta)]
        lg = [math.log(p - 1.0 + eta), math.log(p - 1.0 - eta)]
        ld = [_log(abs(p - 1.0 + eta - c * (1.0 - eta))), _log(abs(p - 1.0 - eta - c * (1.0 + eta)))]
        lw = [math.log(0.5)] * 2
    lF, lG, lD, _ = chain_log_moments(p, spec.N, level_logs, (lf, lg, ld, lw),
                                      math.log(c), spec.log_K, backend=backend)
    return LpSummary(lF / p, lG / p, lD / p, c)


def chain_total_log_mass(spec: ChainSpec, backend=None) -> float:
    p = spec.p.p
    to_line, to_left, up, left_line = spec.log_level_probs()
    level_logs = (spec.step_log, to_left + up, to_line, to_left + left_line)
    return chain_log_moments(p, spec.N, level_logs, ([0.0], [0.0], [NEG_INF], [0.0]),
                             0.0, spec.log_K, backend=backend)[3]


def _split_factor(p, eta):
    return 0.5 * ((1.0 + eta) ** p + (1.0 - eta) ** p)


def asymptotic_summary(p, K=None, eta: float = 0.0, log_K: Optional[float] = None):
    """Limits as ``N -> inf`` of ``||F||^p``, ``||G||^p`` and the deficit's liminf bound."""
    p = as_exponent(p).p
    lk = log_of_number(K) if log_K is None else float(log_K)
    if lk <= 0:
        raise ValueError("K must exceed 1")
    if eta < 0:
        raise ValueError("eta must be non-negative")
    base = lk / (2.0 * p ** (p - 1.0))
    limF = 0.5 + base * _split_factor(p, eta)
    limG = 0.5 + (p - 1.0) ** p * base * _split_factor(p, eta / (p - 1.0))
    lim_def = p * eta ** p * lk / 2.0
    return limF, limG, lim_def


# ---------------------------------------------------------------------------
# sharpness


def ineq_alpha(p: float) -> float:
    return p * (2.0 - p) / (2.0 * (p - 1.0))


def ineq_holds(p: float, eta: float) -> bool:
    lhs = _split_factor(p, eta)
    rhs = 1.0 + p * (p - 1.0) / 2.0 * eta ** 2 - ineq_alpha(p) * eta ** 2
    return lhs >= rhs


def auxill_holds(p: float) -> bool:
    lhs = 2.0 * (p - 1.0) ** (p - 1.0) * (p - 2.0) / p ** (p - 2.0)
    return lhs > ((p - 1.0) ** p - 1.0) / 2.0


def near_two_bracket(p: float, eps: float) -> float:
    """Lower bound for ``||G||^p - (p-1-eps)^p ||F||^p`` in the near-two recipe."""
    a = (p - 1.0 - eps / 2.0) ** p
    return ((p - 1.0) ** p - a) * 4.0 * (p - 2.0) / (p ** (p - 1.0) * eps) - (a - 1.0) / 2.0


def sub_recipe(p: float, eps: float, safety: float = 4.0):
    """``(eta, log_K)`` for ``1 < p < 2``.

    ``log_K`` is ``safety`` times the value at which the limiting norms give
    ``||F|| = ((p-1)^-1 - eps) ||G||`` exactly.
    """
    eta = (p - 1.0) * math.sqrt(eps / (2.0 - p)) / 2.0
    c = 1.0 / (p - 1.0) - eps
    gap = _split_factor(p, eta) - (1.0 - (p - 1.0) * eps) ** p * _split_factor(p, eta / (p - 1.0))
    if gap <= 0:
        raise SideConditionError("eps too large: the norm inequality cannot be forced by K")
    log_k = safety * (c ** p - 1.0) * p ** (p - 1.0) / gap
    return eta, log_k


def large_p_log_K(p: float, eps: float, safety: float = 1.5) -> float:
    return safety * p ** (p - 1.0) / (((p - 1.0) / (p - 1.0 - eps)) ** p - 1.0)


MAX_AUTO_N = 1 << 26


def auto_N(log_K: float, target_delta: float = 0.01, minimum: int = 1 << 12) -> int:
    """Smallest ``N >= minimum`` with ``log(1+2 delta) <= 2 target_delta``."""
    return max(minimum, int(math.ceil(log_K / (2.0 * target_delta))))


@dataclass
class ChainSharpness:
    p: float
    eps: float
    recipe: str
    spec: ChainSpec
    summary: LpSummary
    norm_X: float
    norm_Y: float
    deficit: float
    norm_predicate: bool
    deficit_predicate: bool
    deficit_ratio: float
    report: StabilityReport
    side_conditions: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.norm_predicate and self.deficit_predicate

    def to_dict(self) -> dict:
        return {
            "p": self.p, "eps": self.eps, "recipe": self.recipe, "chain": self.spec.to_dict(),
            "norm_X": self.norm_X, "norm_Y": self.norm_Y, "deficit": self.deficit,
            "norm_predicate": self.norm_predicate, "deficit_predicate": self.deficit_predicate,
            "deficit_ratio": self.deficit_ratio, "side_conditions": self.side_conditions,
            "stability": self.report.to_dict(),
        }


def sharpness_report(p, eps: float, recipe: str = "auto", strict: bool = True,
                     N: Optional[int] = None, log_K: Optional[float] = None,
                     backend=None) -> ChainSharpness:
    """Run a near-extremal chain and test the two sharpness predicates.

    Below 2 the roles of the pair swap (``X = G``, ``Y = F``) and ``eta`` is
    positive. Above 2, ``eta = 0`` and ``recipe`` picks ``K``:

    * ``"near_two"``: ``log K = 8 (p-2) / eps``, valid only where the
      auxiliary inequality (``auxill_holds``) is true and ``eps < 8 (p-2)``
    * ``"large_p"``: ``log K`` 1.5 times the break-even value
    * ``"auto"``: ``near_two`` when valid, else ``large_p``

    With ``strict=True`` a violated side condition raises
    :class:`SideConditionError`; otherwise it is recorded and the run proceeds.
    """
    e = as_exponent(p)
    p = e.p
    if e.regime is Regime.CRITICAL:
        raise SideConditionError("no sharpness recipe at p = 2")
    if not eps > 0:
        raise SideConditionError("eps must be positive")
    side = {}
    if p < 2:
        if eps >= 1.0 / (p - 1.0):
            raise SideConditionError("eps must be below (p-1)^-1")
        eta, lk = sub_recipe(p, eps)
        side["ineq"] = ineq_holds(p, eta)
        side["eps_linearization"] = 1.0 - (1.0 - (p - 1.0) * eps) ** p >= (p - 1.0) * eps
        side["eta_range"] = eta < min(1.0, p - 1.0)
        recipe = "sub"
    else:
        eta = 0.0
        near_two = {
            "auxill": auxill_holds(p),
            "eps_below_8(p-2)": eps < 8.0 * (p - 2.0),
            "bracket_nonnegative": near_two_bracket(p, eps) >= 0,
        }
        if recipe == "auto":
            recipe = "near_two" if all(near_two.values()) else "large_p"
        if recipe == "near_two":
            side.update(near_two)
            lk = 8.0 * (p - 2.0) / eps
        elif recipe == "large_p":
            side["eps_below_p-1"] = eps < p - 1.0
            lk = large_p_log_K(p, eps)
        else:
            raise ValueError(f"unknown recipe {recipe!r}")
    if log_K is not None:
        lk = float(log_K)
    # above 2 the finite-N error in ||G||/||F|| is several times larger
    n = auto_N(lk, target_delta=0.01 if p < 2 else 0.001) if N is None else int(N)
    if N is None:
        side["N_within_cap"] = n <= MAX_AUTO_N
        n = min(n, MAX_AUTO_N)
    failed = [k for k, ok in side.items() if not ok]
    if failed and strict:
        raise SideConditionError(f"side conditions violated for p={p}, eps={eps}: {failed}")
    if not side.get("eta_range", True):
        raise SideConditionError("eta from the recipe is out of range")
    spec = ChainSpec(e, lk, n, eta)
    summ = chain_lp_summary(spec, backend=backend)
    if p < 2:
        norm_X, norm_Y = summ.normG, summ.normF
        deficit = summ.deficit / (p - 1.0)
        norm_ok = norm_Y >= (1.0 / (p - 1.0) - eps) * norm_X
        bound = p / (4.0 * (p - 1.0)) * math.sqrt(eps / (2.0 - p)) * norm_X
        deficit_ok = deficit >= bound
        ratio = deficit / (math.sqrt(eps) * norm_X)
    else:
        norm_X, norm_Y = summ.normF, summ.normG
        deficit = summ.deficit
        norm_ok = norm_Y >= (p - 1.0 - eps) * norm_X
        # compare p-th powers in log space
        lhs = p * summ.log_deficit
        rhs = p * math.log(p - 1.0) + math.log(eps / 2.0) + p * summ.log_normF
        deficit_ok = lhs >= rhs
        ratio = math.exp(lhs - math.log(eps) - p * summ.log_normF)
    report = build_report(Variant.MART_NON_ORTH, e, norm_X, norm_Y, deficit)
    return ChainSharpness(p, eps, recipe, spec, summ, norm_X, norm_Y, deficit,
                          bool(norm_ok), bool(deficit_ok), ratio, report, side)


# ---------------------------------------------------------------------------
# p = 2


@dataclass(frozen=True)
class CriticalCounterexample:
    ratio: float
    norm_X: float
    norm_Y: float
    deficit: float

    def __float__(self):
        return self.ratio


def critical_counterexample() -> CriticalCounterexample:
    """Two-step pair on ``[0, 1]`` with equal L^2 norms and a fixed deficit.

    ``X = Y = 1`` first, then ``X = 2`` on the left half and ``Y = 2`` on the
    right half. The cells are the two halves, each of mass 1/2.
    """
    w = np.array([0.5, 0.5])
    x0 = np.array([1.0, 1.0])
    y0 = np.array([1.0, 1.0])
    x1 = np.array([2.0, 0.0])
    y1 = np.array([0.0, 2.0])
    if np.any(np.abs(y1 - y0) > np.abs(x1 - x0)) or np.dot(w, x1 - x0) != 0 or np.dot(w, y1 - y0) != 0:
        raise AssertionError("construction is not a subordinate martingale pair")
    nx = math.sqrt(float(np.dot(w, x1 ** 2)))
    ny = math.sqrt(float(np.dot(w, y1 ** 2)))
    d = math.sqrt(float(np.dot(w, (np.abs(y1) - np.abs(x1)) ** 2)))
    return CriticalCounterexample(d / nx, nx, ny, d)
