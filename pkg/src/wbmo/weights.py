"""Weights and their size characteristics.

A weight here is a nonnegative step function together with, when the
defining formula allows it, a closed-form description |x| |-> w(|x|) as a
short list of power/constant segments.  The closed form is what makes the
characteristic computations exact: cell values are averages of the true
function (computed from antiderivatives, never from point samples), and
power transforms w^s are re-materialized the same way whenever the
transformed formula is still integrable on the grid.  Only when it is not
(or when the weight is a bare table of cell values) do we fall back to
transforming the cell values pointwise, and every report records which
route was taken.

Characteristics follow the usual shapes: with I(w) denoting the average
of w over I,

    A_1:   sup_I  I(w) / ess inf_I w
    A_p:   sup_I  I(w) * I(w^{-1/(p-1)})^{p-1}
    RHI:   sup_I  I(w^{1+delta})^{1/(1+delta)} / I(w)

and the A_infty margin checks, for a single interval, how much of w's
mass the heaviest admissible cell set (|E| < delta |I|) can grab.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import (
    BestTracker,
    FamilyLike,
    Grid,
    GridInterval,
    StepFunction,
    enumerate_family,
    family_groups,
    family_label,
    refine_family,
)

__all__ = [
    "WeightSpec",
    "Weight",
    "CharacteristicReport",
    "AinfMarginReport",
    "RhiReport",
    "RhiMaxDeltaReport",
    "materialize_weight",
    "refine_weight",
    "transform_weight",
    "a1_characteristic",
    "ap_characteristic",
    "ainf_margin",
    "rhi_constant",
    "rhi_max_delta",
]

WEIGHT_KINDS = ("constant", "power", "truncated-power", "custom")

#: Relative change under one 4x grid refinement below which a constant is
#: called stable.
STABILITY_RTOL = 0.05


@dataclass(frozen=True)
class WeightSpec:
    """Recipe for a weight.

    constant:        w = c, c > 0
    power:           w = |x|^alpha, alpha > -1
    truncated-power: w = max(|x|^alpha, floor), floor > 0
    custom:          explicit nonnegative cell values
    """

    kind: str
    c: float = 1.0
    alpha: float = 0.0
    floor: float = 1.0
    values: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in WEIGHT_KINDS:
            raise ValueError(
                f"unknown weight kind {self.kind!r}; expected one of {WEIGHT_KINDS}"
            )
        if self.kind == "constant" and not self.c > 0:
            raise ValueError(f"constant weight needs c > 0, got c={self.c}")
        if self.kind == "power" and not self.alpha > -1:
            raise ValueError(
                f"power weight needs alpha > -1 (else not integrable near 0), "
                f"got alpha={self.alpha}"
            )
        if self.kind == "truncated-power" and not self.floor > 0:
            raise ValueError(f"truncated-power needs floor > 0, got {self.floor}")
        if self.kind == "custom":
            if self.values is None or len(self.values) == 0:
                raise ValueError("custom weight needs explicit cell values")
            vals = np.asarray(self.values, dtype=np.float64)
            if not np.all(np.isfinite(vals)) or np.any(vals < 0):
                raise ValueError("custom weight values must be finite and >= 0")

    def label(self) -> str:
        if self.kind == "constant":
            return f"constant({self.c:g})"
        if self.kind == "power":
            return f"|x|^{self.alpha:g}"
        if self.kind == "truncated-power":
            return f"max(|x|^{self.alpha:g}, {self.floor:g})"
        return f"custom({len(self.values or ())} cells)"


# -- closed forms -----------------------------------------------------------
#
# A segment list describes an even function of x through r = |x|: entries
# (r_lo, r_hi, kind, param) with kind "pow" (r^param) or "const" (param),
# covering [0, inf) without gaps.

Segment = tuple[float, float, str, float]


def _segments_for(spec: WeightSpec) -> tuple[Segment, ...] | None:
    inf = math.inf
    if spec.kind == "constant":
        return ((0.0, inf, "const", spec.c),)
    if spec.kind == "power":
        if spec.alpha == 0.0:
            return ((0.0, inf, "const", 1.0),)
        return ((0.0, inf, "pow", spec.alpha),)
    if spec.kind == "truncated-power":
        if spec.alpha == 0.0:
            return ((0.0, inf, "const", max(1.0, spec.floor)),)
        r_star = spec.floor ** (1.0 / spec.alpha)
        if spec.alpha > 0:
            # floor wins near zero, the power takes over past r_star
            return ((0.0, r_star, "const", spec.floor), (r_star, inf, "pow", spec.alpha))
        return ((0.0, r_star, "pow", spec.alpha), (r_star, inf, "const", spec.floor))
    return None


def _transform_segments(segments: tuple[Segment, ...], s: float) -> tuple[Segment, ...]:
    out = []
    for lo, hi, kind, param in segments:
        if kind == "const":
            out.append((lo, hi, "const", param**s))
        else:
            out.append((lo, hi, "pow", param * s))
    return tuple(out)


def _segments_integrable(segments: tuple[Segment, ...], grid: Grid) -> bool:
    touches_zero = grid.a <= 0.0 <= grid.b
    if not touches_zero:
        return True
    lo, _hi, kind, param = segments[0]
    assert lo == 0.0
    return kind == "const" or param > -1.0


def _even_antideriv(segments: tuple[Segment, ...], r: np.ndarray, r_base: float) -> np.ndarray:
    """G(r) = int_{r_base}^{r} of the segment function, for r >= r_base >= 0."""
    total = np.zeros_like(r)
    for lo, hi, kind, param in segments:
        lo = max(lo, r_base)
        upper = np.minimum(r, hi)
        active = upper > lo
        if kind == "const":
            contrib = param * (upper - lo)
        elif param == -1.0:
            # only reachable with lo > 0 (guarded by the integrability check)
            with np.errstate(divide="ignore", invalid="ignore"):
                contrib = np.log(np.where(active, upper, lo + 1.0) / lo)
        else:
            e1 = param + 1.0
            base = 0.0 if lo == 0.0 else lo**e1
            with np.errstate(divide="ignore", invalid="ignore"):
                contrib = (np.where(active, upper, lo) ** e1 - base) / e1
        total += np.where(active, contrib, 0.0)
    return total


def _cell_averages(segments: tuple[Segment, ...], grid: Grid) -> np.ndarray:
    """Exact per-cell averages: differences of the antiderivative at cell edges.

    The function is even, so with G an antiderivative of w(|.|) on r >= 0 the
    signed antiderivative is F(x) = sign(x) G(|x|).  When the grid sits on one
    side of the origin the base point of G shifts to the smallest |edge|; the
    shift cancels in the differences because all edges share one sign.
    """
    edges = grid.edges()
    touches_zero = grid.a <= 0.0 <= grid.b
    r_base = 0.0 if touches_zero else float(np.min(np.abs(edges)))
    g = _even_antideriv(segments, np.abs(edges), r_base)
    f = np.sign(edges) * g
    vals = np.diff(f) / grid.h
    return vals


@dataclass
class Weight:
    """Materialized weight: exact cell values plus the closed form, if any."""

    f: StepFunction
    spec: WeightSpec | None
    segments: tuple[Segment, ...] | None
    label: str

    @property
    def grid(self) -> Grid:
        return self.f.grid

    @property
    def zero_cells(self) -> np.ndarray:
        return np.flatnonzero(self.f.values == 0.0)


def materialize_weight(spec: WeightSpec, grid: Grid) -> Weight:
    """Exact cell averages of the weight on the grid.

    Closed-form kinds integrate the formula over each cell; custom specs
    must supply exactly one value per cell.
    """
    if spec.kind == "custom":
        vals = np.asarray(spec.values, dtype=np.float64)
        if len(vals) != grid.n_cells:
            raise ValueError(
                f"custom weight has {len(vals)} values, grid has {grid.n_cells} cells"
            )
        return Weight(StepFunction(grid, vals), spec, None, spec.label())
    segments = _segments_for(spec)
    assert segments is not None
    if not _segments_integrable(segments, grid):
        raise ValueError(f"weight {spec.label()} is not integrable on this grid")
    vals = _cell_averages(segments, grid)
    assert np.all(vals >= 0), "weight materialization produced a negative cell"
    return Weight(StepFunction(grid, vals), spec, segments, spec.label())


def refine_weight(w: Weight, factor: int = 4) -> Weight:
    """The same weight on a grid refined by `factor`.

    Closed forms re-materialize exactly; custom tables repeat cell values,
    which reproduces the identical step function on the finer grid.
    """
    fine = w.grid.refined(factor)
    if w.spec is not None and w.spec.kind != "custom":
        return materialize_weight(w.spec, fine)
    return Weight(StepFunction(fine, np.repeat(w.f.values, factor)), w.spec, None, w.label)


def transform_weight(w: Weight, s: float) -> tuple[Weight, bool]:
    """Materialize w^s; returns (weight, closed_form_flag).

    With a closed form whose transform stays integrable on the grid, the
    result is again exact cell averages of the true function w^s (flag
    True).  Otherwise the cell values are raised to the power s pointwise
    (flag False), which is the transform of the step function rather than
    of the underlying formula; characteristics computed from it are grid
    functionals in their own right but will not converge to a continuum
    value when w^s fails to be integrable.
    """
    if s == 1.0:
        return w, w.segments is not None
    if w.segments is not None:
        tseg = _transform_segments(w.segments, s)
        if _segments_integrable(tseg, w.grid):
            vals = _cell_averages(tseg, w.grid)
            label = f"({w.label})^{s:g}"
            return Weight(StepFunction(w.grid, vals), None, tseg, label), True
    if s < 0 and len(w.zero_cells) > 0:
        raise ValueError(
            f"cannot raise {w.label} to power {s:g}: weight vanishes on "
            f"{len(w.zero_cells)} cells"
        )
    vals = w.f.values**s
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"pointwise transform of {w.label} to power {s:g} overflows")
    return Weight(StepFunction(w.grid, vals), None, None, f"({w.label})^{s:g}"), False


# -- reports ----------------------------------------------------------------

@dataclass(frozen=True)
class CharacteristicReport:
    kind: str
    value: float
    p: float
    witness: GridInterval | None
    weight: str
    family: str
    n_cells: int
    closed_form: bool = True
    notes: str = ""


@dataclass(frozen=True)
class AinfMarginReport:
    interval: GridInterval
    delta: float
    epsilon: float
    budget_cells: int
    worst_fraction: float
    threshold: float
    passed: bool
    weight: str


@dataclass(frozen=True)
class RhiReport:
    delta: float
    constant: float
    witness: GridInterval | None
    stable: bool
    refined_constant: float
    closed_form: bool
    weight: str
    family: str
    n_cells: int


@dataclass(frozen=True)
class RhiMaxDeltaReport:
    delta: float
    c_max: float
    delta_hi: float
    tol: float
    feasible: bool
    probes: tuple[tuple[float, float, bool], ...]
    diagnostic: str
    weight: str
    family: str


# -- characteristics ---------------------------------------------------------

def a1_characteristic(w: Weight, family: FamilyLike) -> CharacteristicReport:
    """sup over the family of average(w, I) / ess_inf(w, I).

    An interval where the weight's minimum cell is 0 but the average is
    positive pushes the characteristic to +inf; an interval where w
    vanishes identically is neutral (ratio 1, the condition is vacuous).
    """
    f = w.f
    tracker = BestTracker()
    for length, starts in family_groups(w.grid, family):
        ends = starts + length
        avg = f.range_sum(starts, ends) / length
        mn = f.range_min(starts, ends)
        pos = mn > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(
                pos,
                avg / np.where(pos, mn, 1.0),
                np.where(avg > 0, np.inf, 1.0),
            )
        tracker.offer_group(ratio, starts, length)
    return CharacteristicReport(
        kind="a1",
        value=tracker.value,
        p=1.0,
        witness=tracker.interval,
        weight=w.label,
        family=family_label(family),
        n_cells=w.grid.n_cells,
        closed_form=w.segments is not None,
    )


def _first_interval_containing_zero_cell(w: Weight, family: FamilyLike) -> GridInterval | None:
    zero = np.zeros(w.grid.n_cells)
    zero[w.zero_cells] = 1.0
    z = StepFunction(w.grid, zero)
    for iv in enumerate_family(w.grid, family):
        if z.range_sum(np.array([iv.start]), np.array([iv.end]))[0] > 0:
            return iv
    return None


def ap_characteristic(w: Weight, p: float, family: FamilyLike) -> CharacteristicReport:
    """sup over the family of average(w, I) * average(w^{-1/(p-1)}, I)^{p-1}.

    The dual weight w^{-1/(p-1)} goes through transform_weight, so it is
    exact whenever the transformed formula is integrable and a pointwise
    cell transform otherwise; the report says which.
    """
    if not (math.isfinite(p) and p > 1.0):
        raise ValueError(f"ap_characteristic needs finite p > 1, got p={p}")
    if len(w.zero_cells) > 0:
        # a vanishing cell gives the dual infinite mass on any interval over it
        witness = _first_interval_containing_zero_cell(w, family)
        return CharacteristicReport(
            kind="ap",
            value=math.inf,
            p=p,
            witness=witness,
            weight=w.label,
            family=family_label(family),
            n_cells=w.grid.n_cells,
            closed_form=False,
            notes=f"weight vanishes on {len(w.zero_cells)} cells",
        )
    dual, dual_closed = transform_weight(w, -1.0 / (p - 1.0))
    f, g = w.f, dual.f
    tracker = BestTracker()
    for length, starts in family_groups(w.grid, family):
        ends = starts + length
        avg_w = f.range_sum(starts, ends) / length
        avg_dual = g.range_sum(starts, ends) / length
        ratio = avg_w * avg_dual ** (p - 1.0)
        tracker.offer_group(ratio, starts, length)
    return CharacteristicReport(
        kind="ap",
        value=tracker.value,
        p=p,
        witness=tracker.interval,
        weight=w.label,
        family=family_label(family),
        n_cells=w.grid.n_cells,
        closed_form=(w.segments is not None) and dual_closed,
        notes="" if dual_closed else "dual weight materialized pointwise",
    )


def ainf_margin(w: Weight, I: GridInterval, delta: float, epsilon: float) -> AinfMarginReport:
    """Worst-case mass fraction w(E)/w(I) over cell unions E in I with
    |E| < delta |I|, against the threshold 1 - epsilon.

    The worst E is greedy: the budget is k = ceil(delta n_I) - 1 cells
    (the largest count strictly under delta n_I) and the heaviest k cells
    grab the most mass.  passed means even that E stays under threshold.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError(f"ainf_margin needs delta in (0, 1), got {delta}")
    if not (0.0 < epsilon < 1.0):
        raise ValueError(f"ainf_margin needs epsilon in (0, 1), got {epsilon}")
    if I.end > w.grid.n_cells:
        raise ValueError(f"interval {I} exceeds grid of {w.grid.n_cells} cells")
    cells = w.f.values[I.start : I.end]
    total = float(np.sum(cells))
    if total <= 0.0:
        raise ValueError(f"ainf_margin: weight has no mass on {I}")
    budget = math.ceil(delta * I.n_cells) - 1
    if budget <= 0:
        worst = 0.0
    else:
        top = np.partition(cells, len(cells) - budget)[len(cells) - budget :]
        worst = float(np.sum(top)) / total
    threshold = 1.0 - epsilon
    return AinfMarginReport(
        interval=I,
        delta=delta,
        epsilon=epsilon,
        budget_cells=max(budget, 0),
        worst_fraction=worst,
        threshold=threshold,
        passed=worst < threshold,
        weight=w.label,
    )


def _rhi_value(w: Weight, delta: float, family: FamilyLike) -> tuple[float, GridInterval | None, bool]:
    wt, closed = transform_weight(w, 1.0 + delta)
    f, g = w.f, wt.f
    tracker = BestTracker()
    inv = 1.0 / (1.0 + delta)
    for length, starts in family_groups(w.grid, family):
        ends = starts + length
        avg_w = f.range_sum(starts, ends) / length
        avg_t = g.range_sum(starts, ends) / length
        pos = avg_w > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(pos, avg_t**inv / np.where(pos, avg_w, 1.0), 1.0)
        tracker.offer_group(ratio, starts, length)
    return tracker.value, tracker.interval, closed


def rhi_constant(w: Weight, delta: float, family: FamilyLike) -> RhiReport:
    """Best constant in the reverse Holder inequality at exponent 1 + delta:

        sup_I  average(w^{1+delta}, I)^{1/(1+delta)} / average(w, I).

    Stability is checked against one 4x grid refinement of the same weight
    and family; a constant that moves >= 5% is flagged unstable, the usual
    sign that w^{1+delta} has stopped being integrable and the value is a
    pure grid artifact.
    """
    if not delta > 0:
        raise ValueError(f"rhi_constant needs delta > 0, got {delta}")
    value, witness, closed = _rhi_value(w, delta, family)
    fine_value, _, _ = _rhi_value(refine_weight(w, 4), delta, refine_family(family, 4))
    if math.isfinite(value) and math.isfinite(fine_value) and value > 0:
        stable = abs(fine_value - value) / value < STABILITY_RTOL
    else:
        stable = False
    return RhiReport(
        delta=delta,
        constant=value,
        witness=witness,
        stable=stable,
        refined_constant=fine_value,
        closed_form=closed,
        weight=w.label,
        family=family_label(family),
        n_cells=w.grid.n_cells,
    )


def rhi_max_delta(
    w: Weight,
    family: FamilyLike,
    c_max: float,
    delta_hi: float = 4.0,
    tol: float = 1e-3,
) -> RhiMaxDeltaReport:
    """Largest delta <= delta_hi with a stable reverse Holder constant
    <= c_max, located by bisection to within tol.

    Feasibility is monotone in exact arithmetic (the constant grows with
    delta), so bisection applies; if even the smallest probe fails the
    result is 0.0 with a diagnostic.
    """
    if not c_max > 1.0:
        raise ValueError(f"rhi_max_delta needs c_max > 1, got {c_max}")
    probes: list[tuple[float, float, bool]] = []

    def feasible(d: float) -> bool:
        rep = rhi_constant(w, d, family)
        ok = math.isfinite(rep.constant) and rep.constant <= c_max and rep.stable
        probes.append((d, rep.constant, ok))
        return ok

    label = family_label(family)
    if feasible(delta_hi):
        return RhiMaxDeltaReport(
            delta=delta_hi,
            c_max=c_max,
            delta_hi=delta_hi,
            tol=tol,
            feasible=True,
            probes=tuple(probes),
            diagnostic="",
            weight=w.label,
            family=label,
        )
    lo, hi = 0.0, delta_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        return RhiMaxDeltaReport(
            delta=0.0,
            c_max=c_max,
            delta_hi=delta_hi,
            tol=tol,
            feasible=False,
            probes=tuple(probes),
            diagnostic=(
                f"no feasible delta: smallest probe {hi:g} already exceeds "
                f"c_max={c_max:g} or is unstable"
            ),
            weight=w.label,
            family=label,
        )
    return RhiMaxDeltaReport(
        delta=lo,
        c_max=c_max,
        delta_hi=delta_hi,
        tol=tol,
        feasible=True,
        probes=tuple(probes),
        diagnostic="",
        weight=w.label,
        family=label,
    )
