"""Oscillation, weighted BMO seminorms, and sharp maximal fields.

The mean oscillation of f over an interval I is

    osc(f, I) = I(|f - I(f)|),        I(g) = average of g over I,

and the weighted seminorm takes the supremum of osc(f, I) / I(u) over an
interval family.  The sharp maximal field assigns to each grid cell the
largest oscillation among family intervals covering that cell.  All three
reduce to exact finite sums on step functions; the only approximation in
this module is the family itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import maximum_filter1d

from .grid import (
    BestTracker,
    FamilyLike,
    GridInterval,
    StepFunction,
    check_all_aligned_budget,
    family_groups,
    family_label,
)
from .weights import Weight

__all__ = [
    "BmoReport",
    "SharpField",
    "oscillation",
    "bmo_u_seminorm",
    "sharp_maximal",
    "weighted_lp_norm",
    "sharp_norm_ratio",
    "operator_lpu_ratio",
]


def oscillation(f: StepFunction, I: GridInterval) -> float:
    """Mean oscillation of f over I, average of |f - mean|."""
    if I.end > f.grid.n_cells:
        raise ValueError(f"interval {I} exceeds grid of {f.grid.n_cells} cells")
    vals = f.values[I.start : I.end]
    m = float(np.mean(vals))
    return float(np.mean(np.abs(vals - m)))


def _osc_by_start(values: np.ndarray, prefix: np.ndarray, length: int, starts: np.ndarray) -> np.ndarray:
    """Oscillation for every interval [s, s+length), vectorized per length.

    Dense start sets use a strided window view; dyadic-style disjoint
    blocks reshape instead.  Cost is O(len(starts) * length) elementwise.
    """
    n = len(values)
    means = (prefix[starts + length] - prefix[starts]) / length
    if length == 1:
        return np.zeros(len(starts))
    dense = len(starts) == n - length + 1 and starts[0] == 0
    blocks = (
        len(starts) * length == n
        and starts[0] == 0
        and (len(starts) == 1 or starts[1] - starts[0] == length)
    )
    if dense:
        view = sliding_window_view(values, length)
        return np.mean(np.abs(view - means[:, None]), axis=1)
    if blocks:
        view = values.reshape(-1, length)
        return np.mean(np.abs(view - means[:, None]), axis=1)
    out = np.empty(len(starts))
    for i, s in enumerate(starts):
        out[i] = np.mean(np.abs(values[s : s + length] - means[i]))
    return out


@dataclass(frozen=True)
class BmoReport:
    value: float
    witness: GridInterval | None
    function: str
    weight: str
    family: str
    n_cells: int


def bmo_u_seminorm(
    f: StepFunction,
    u: Weight,
    family: FamilyLike,
    function_id: str = "f",
) -> BmoReport:
    """sup over the family of osc(f, I) / average(u, I).

    An interval where u has zero average but f oscillates sends the
    seminorm to +inf; intervals where both vanish contribute nothing.
    With u identically 1 this is the classical BMO seminorm restricted
    to the family.
    """
    if f.grid != u.grid:
        raise ValueError("function and weight live on different grids")
    check_all_aligned_budget(f.grid, family, "bmo_u_seminorm")
    prefix = f.prefix()
    uprefix = u.f.prefix()
    tracker = BestTracker()
    for length, starts in family_groups(f.grid, family):
        osc = _osc_by_start(f.values, prefix, length, starts)
        avg_u = (uprefix[starts + length] - uprefix[starts]) / length
        pos = avg_u > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(
                pos,
                osc / np.where(pos, avg_u, 1.0),
                np.where(osc > 0, np.inf, 0.0),
            )
        tracker.offer_group(ratio, starts, length)
    return BmoReport(
        value=max(tracker.value, 0.0),
        witness=tracker.interval,
        function=function_id,
        weight=u.label,
        family=family_label(family),
        n_cells=f.grid.n_cells,
    )


@dataclass(frozen=True)
class SharpField:
    """Per-cell sharp maximal values, as a step function on the same grid."""

    f: StepFunction
    family: str
    source: str


def sharp_maximal(f: StepFunction, family: FamilyLike, function_id: str = "f") -> SharpField:
    """Cell c gets sup of osc(f, I) over family intervals I containing c.

    Cells no family interval covers keep the value 0.  Dense start sets
    reduce the covering maximum to a trailing sliding maximum (a single
    maximum_filter1d call per window length); sparse sets scatter instead.
    """
    check_all_aligned_budget(f.grid, family, "sharp_maximal")
    n = f.grid.n_cells
    prefix = f.prefix()
    out = np.zeros(n)
    for length, starts in family_groups(f.grid, family):
        osc = _osc_by_start(f.values, prefix, length, starts)
        dense = len(starts) == n - length + 1 and starts[0] == 0
        if dense and length > 1:
            padded = np.full(n, -np.inf)
            padded[: len(osc)] = osc
            covered = maximum_filter1d(
                padded, size=length, mode="constant", cval=-np.inf,
                origin=(length - 1) // 2,
            )
            np.maximum(out, covered, out=out)
        elif (
            len(starts) * length == n
            and starts[0] == 0
            and (len(starts) == 1 or starts[1] - starts[0] == length)
        ):
            np.maximum(out, np.repeat(osc, length), out=out)
        else:
            for i, s in enumerate(starts):
                seg = out[s : s + length]
                np.maximum(seg, osc[i], out=seg)
    return SharpField(StepFunction(f.grid, out), family_label(family), function_id)


def weighted_lp_norm(f: StepFunction, u: Weight, p: float) -> float:
    """(int |f|^p u)^{1/p}, the exact step sum h * sum |f_i|^p u_i."""
    if p < 1.0:
        raise ValueError(f"weighted_lp_norm needs p >= 1, got p={p}")
    if f.grid != u.grid:
        raise ValueError("function and weight live on different grids")
    s = float(np.sum(np.abs(f.values) ** p * u.f.values))
    return (f.grid.h * s) ** (1.0 / p)


def sharp_norm_ratio(f: StepFunction, p: float, family: FamilyLike) -> float:
    """|| f^sharp ||_p / || f ||_p over the given family (plain Lebesgue).

    A diagnostic only; no target value is asserted anywhere.  Rejects f
    with zero norm, and constant f: the sharp field kills constants, so
    the ratio degenerates to 0 and says nothing about equivalence.
    """
    if p <= 1.0:
        raise ValueError(f"sharp_norm_ratio needs p > 1, got p={p}")
    denom = (f.grid.h * float(np.sum(np.abs(f.values) ** p))) ** (1.0 / p)
    if denom == 0.0:
        raise ValueError("sharp_norm_ratio: f has zero L^p norm")
    if float(np.max(f.values)) == float(np.min(f.values)):
        raise ValueError(
            "sharp_norm_ratio: f is constant, its sharp maximal field vanishes"
        )
    sharp = sharp_maximal(f, family)
    num = (f.grid.h * float(np.sum(sharp.f.values**p))) ** (1.0 / p)
    return num / denom


def operator_lpu_ratio(T, f: StepFunction, u: Weight, p: float) -> float:
    """|| Tf ||_{L^p(u)} / || f ||_{L^p(u)} for a single f."""
    from .operators import apply_operator

    denom = weighted_lp_norm(f, u, p)
    if denom == 0.0:
        raise ValueError("operator_lpu_ratio: f has zero weighted norm")
    return weighted_lp_norm(apply_operator(T, f), u, p) / denom
