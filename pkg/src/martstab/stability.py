"""Pass/fail reports for the four stability statements.

Each report compares a measured deficit ``|| |Tf| - C |f| ||_p`` with the
bound ``c_p * eps**r * ||f||_p`` where ``C`` is the sharp norm, ``eps`` is
how far the measured ratio falls short of ``C``, and ``r`` is ``1/2`` below
``p = 2`` and ``1/p`` above.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Optional

from .bellman import Exponent, Regime, as_exponent, c_nonorth, c_orth, orth_sharp_constant


class Variant(enum.Enum):
    MART_NON_ORTH = "MartNonOrth"
    MART_ORTH = "MartOrth"
    MULTIPLIER = "Multiplier"
    RIESZ = "Riesz"

    @property
    def orthogonal(self) -> bool:
        return self in (Variant.MART_ORTH, Variant.RIESZ)


def as_variant(v) -> Variant:
    if isinstance(v, Variant):
        return v
    for member in Variant:
        if v in (member.value, member.name) or str(v).lower() == member.value.lower():
            return member
    raise ValueError(f"unknown variant {v!r}")


def sharp_constant(variant, p) -> float:
    """``p* - 1`` for plain subordination, ``cot(pi / 2p*)`` for orthogonal pairs."""
    e = as_exponent(p)
    if as_variant(variant).orthogonal:
        return orth_sharp_constant(e.p)
    return e.p_star - 1.0


def stability_factor(variant, p) -> float:
    return c_orth(p) if as_variant(variant).orthogonal else c_nonorth(p)


def eps_exponent(p) -> float:
    p = as_exponent(p).require_noncritical().p
    return 0.5 if p < 2 else 1.0 / p


@dataclass(frozen=True)
class StabilityReport:
    p: Exponent
    variant: Variant
    sharp_const: float
    eps: float
    ratio_raw: float
    deficit: float
    bound: float
    margin: float
    passed: bool
    norm_f: float = float("nan")
    norm_Tf: float = float("nan")

    def as_row(self) -> dict:
        return {
            "variant": self.variant.value,
            "p": self.p.p,
            "eps": self.eps,
            "ratio_raw": self.ratio_raw,
            "deficit": self.deficit,
            "bound": self.bound,
            "margin": self.margin,
            "pass": self.passed,
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p"] = self.p.p
        d["variant"] = self.variant.value
        return d


@dataclass(frozen=True)
class NoStability:
    """Marker returned at ``p = 2``, where no estimate of this type exists."""

    p: Exponent
    variant: Variant
    reason: str = "no eps-power stability bound exists at p = 2"
    passed: bool = False

    def as_row(self) -> dict:
        nan = float("nan")
        return {"variant": self.variant.value, "p": self.p.p, "eps": nan, "ratio_raw": nan,
                "deficit": nan, "bound": nan, "margin": nan, "pass": "n/a"}

    def to_dict(self) -> dict:
        return {"p": self.p.p, "variant": self.variant.value, "reason": self.reason}


def build_report(variant, p, norm_f: float, norm_Tf: float, deficit: float):
    variant = as_variant(variant)
    e = as_exponent(p)
    if not norm_f > 0:
        raise ValueError("norm_f must be positive")
    if e.regime is Regime.CRITICAL:
        return NoStability(e, variant)
    if deficit < 0 or not math.isfinite(deficit):
        raise ValueError("deficit must be a finite non-negative number")
    sharp = sharp_constant(variant, e)
    ratio = norm_Tf / norm_f
    eps = max(0.0, sharp - ratio)
    bound = stability_factor(variant, e.p) * eps ** eps_exponent(e.p) * norm_f
    return StabilityReport(
        p=e, variant=variant, sharp_const=sharp, eps=eps, ratio_raw=ratio,
        deficit=float(deficit), bound=bound, margin=bound - deficit,
        passed=bool(deficit <= bound), norm_f=float(norm_f), norm_Tf=float(norm_Tf),
    )


CSV_COLUMNS = ("variant", "p", "eps", "ratio_raw", "deficit", "bound", "margin", "pass")


@dataclass
class SweepResult:
    reports: list
    worst_margin: Optional[float]

    @property
    def all_pass(self) -> bool:
        return all(getattr(r, "passed", False) for r in self.reports)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for r in self.reports:
            w.writerow(r.as_row())
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def sweep(variant, p, experiments: Iterable) -> SweepResult:
    """One report per ``(norm_f, norm_Tf, deficit)`` triple.

    ``worst_margin`` is ``None`` when no experiment was supplied.
    """
    reports = [build_report(variant, p, *triple) for triple in experiments]
    margins = [r.margin for r in reports if isinstance(r, StabilityReport)]
    return SweepResult(reports, min(margins) if margins else None)
