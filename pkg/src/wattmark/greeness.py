"""The greeness metric and its usage-intensity analyses.

    G(mui) = acc_pct ** tau / (mui * iec_wh + tec_wh)

mui is the number of inferences performed over one model life cycle, treated
as a continuous axis. Everything here is a pure function of method records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .accounting import MethodRecord
from .errors import DegenerateCurves, ZeroDenominator

DEFAULT_TAU = 2.0
# log-spaced default axis used by the CLI and the curve exports
DEFAULT_MUI_RANGE = (1e6, 1e10)
DEFAULT_GRID_POINTS = 200


@dataclass(frozen=True)
class GreenessQuery:
    mui: float
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        if self.mui < 0:
            raise ValueError(f"mui must be non-negative, got {self.mui}")
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")


def greeness_value(record: MethodRecord, mui: float, tau: float = DEFAULT_TAU) -> float:
    """Accuracy-weighted inverse of the full-cycle energy at a given usage."""
    denom = mui * record.iec_wh + record.tec_wh
    if denom <= 0.0:
        raise ZeroDenominator(
            f"{record.method_name}: tec and mui*iec are both zero at mui={mui}")
    return record.acc_pct ** tau / denom


def greeness(record: MethodRecord, query: GreenessQuery) -> float:
    return greeness_value(record, query.mui, query.tau)


@dataclass
class GreenessCurve:
    method_name: str
    tau: float
    points: list[tuple[float, float]] = field(default_factory=list)


def log_grid(mui_min: float, mui_max: float, points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Log-spaced usage-intensity grid over [mui_min, mui_max]."""
    if mui_min <= 0 or mui_max <= mui_min:
        raise ValueError("need 0 < mui_min < mui_max")
    if points < 2:
        raise ValueError("need at least 2 grid points")
    return np.logspace(math.log10(mui_min), math.log10(mui_max), points)


def curve(record: MethodRecord, tau: float, mui_grid) -> GreenessCurve:
    """Pointwise greeness along a strictly increasing usage grid."""
    grid = [float(m) for m in mui_grid]
    if any(m < 0 for m in grid):
        raise ValueError("mui grid values must be non-negative")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("mui grid must be strictly increasing")
    points = [(m, greeness_value(record, m, tau)) for m in grid]
    return GreenessCurve(method_name=record.method_name, tau=tau, points=points)


@dataclass
class CrossoverResult:
    method_a: str
    method_b: str
    mui_star: float | None
    winner_below: str
    winner_above: str


def _pair_winner(a: MethodRecord, b: MethodRecord, mui: float, tau: float) -> str:
    ga = greeness_value(a, mui, tau)
    gb = greeness_value(b, mui, tau)
    if ga > gb:
        return a.method_name
    if gb > ga:
        return b.method_name
    return min(a.method_name, b.method_name)


def crossover(a: MethodRecord, b: MethodRecord, tau: float = DEFAULT_TAU) -> CrossoverResult:
    """Closed-form intersection of two greeness curves.

    With A = acc**tau, solving A_a/(m I_a + T_a) = A_b/(m I_b + T_b) is
    linear in m:  m* = (A_b T_a - A_a T_b) / (A_a I_b - A_b I_a).
    Only a positive m* counts; otherwise one method wins everywhere.
    """
    aa = a.acc_pct ** tau
    ab = b.acc_pct ** tau
    num = ab * a.tec_wh - aa * b.tec_wh
    den = aa * b.iec_wh - ab * a.iec_wh
    if num == 0.0 and den == 0.0:
        raise DegenerateCurves(
            f"{a.method_name} and {b.method_name} are identical up to scale")
    mui_star = None
    if den != 0.0:
        m = num / den
        if m > 0.0 and math.isfinite(m):
            mui_star = m
    if mui_star is None:
        # curves never meet for m >= 0: probe both ends of the axis
        lo = 0.0 if (a.tec_wh > 0 and b.tec_wh > 0) else 1e-12
        below = _pair_winner(a, b, lo, tau)
        above = _pair_winner(a, b, 1e30, tau)
        return CrossoverResult(a.method_name, b.method_name, None, below, above)
    below = _pair_winner(a, b, mui_star * (1.0 - 1e-9), tau)
    above = _pair_winner(a, b, mui_star * (1.0 + 1e-9), tau)
    return CrossoverResult(a.method_name, b.method_name, mui_star, below, above)


@dataclass
class Region:
    mui_low: float
    mui_high: float
    winner: str


def _argmax_method(records: list[MethodRecord], mui: float, tau: float) -> str:
    # exact ties break to the lexicographically smaller name
    return min(records, key=lambda r: (-greeness_value(r, mui, tau), r.method_name)).method_name


def winner_regions(records: list[MethodRecord], tau: float,
                   mui_interval: tuple[float, float]) -> list[Region]:
    """Partition a usage interval into per-method winner regions.

    Cut points are the pairwise positive crossovers; each segment's winner is
    the argmax greeness at its geometric midpoint, and adjacent segments with
    the same winner are merged.
    """
    if not records:
        raise ValueError("need at least one record")
    lo, hi = mui_interval
    if lo <= 0 or hi <= lo:
        raise ValueError("need 0 < mui_low < mui_high")
    cuts = {lo, hi}
    for i, a in enumerate(records):
        for b in records[i + 1:]:
            try:
                result = crossover(a, b, tau)
            except DegenerateCurves:
                continue
            if result.mui_star is not None and lo < result.mui_star < hi:
                cuts.add(result.mui_star)
    edges = sorted(cuts)
    regions: list[Region] = []
    for seg_lo, seg_hi in zip(edges, edges[1:]):
        winner = _argmax_method(records, math.sqrt(seg_lo * seg_hi), tau)
        if regions and regions[-1].winner == winner:
            regions[-1].mui_high = seg_hi
        else:
            regions.append(Region(mui_low=seg_lo, mui_high=seg_hi, winner=winner))
    return regions


def tau_sweep(records: list[MethodRecord], mui_fixed: float,
              tau_grid) -> dict[str, list[tuple[float, float]]]:
    """Greeness of each method at a fixed usage across a grid of tau values."""
    taus = [float(t) for t in tau_grid]
    if any(t <= 0 for t in taus):
        raise ValueError("tau values must be positive")
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValueError("tau grid must be strictly increasing")
    return {
        r.method_name: [(t, greeness_value(r, mui_fixed, t)) for t in taus]
        for r in records
    }


# --- exports ----------------------------------------------------------------

CURVE_COLUMNS = "method,tau,mui,g"
REGION_COLUMNS = "mui_low,mui_high,winner"


def format_curves(curves: list[GreenessCurve]) -> str:
    lines = [CURVE_COLUMNS]
    for c in curves:
        for mui, g in c.points:
            lines.append(f"{c.method_name},{c.tau!r},{mui!r},{g!r}")
    return "\n".join(lines) + "\n"


def format_regions(regions: list[Region]) -> str:
    lines = [REGION_COLUMNS]
    for r in regions:
        lines.append(f"{r.mui_low!r},{r.mui_high!r},{r.winner}")
    return "\n".join(lines) + "\n"
