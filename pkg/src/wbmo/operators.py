"""Operator catalog and the local L^q hypothesis audit.

The catalog holds the operators the harness exercises: exact pointwise
and averaging maps, a truncated Hilbert transform (the standing example
of a singular integral with local L^q control away from its critical
exponent), and the Hardy-Littlewood maximal operator on grid intervals.
Everything is computed exactly on step functions: the truncated Hilbert
kernel is integrated in closed form against each source cell, so no
quadrature error enters anywhere.

hypothesis_test measures, over an interval family, the best constant in

    (int_I |Tf|^q)^{1/q}  <=  C (int_I |f|^q)^{1/q}

per exponent q, across a battery of test functions, and flags the pairs
that break it: zero right side with nonzero left side (infinite ratio),
and finite ratios far above the typical scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter1d

from .grid import (
    FamilyLike,
    GridInterval,
    StepFunction,
    family_groups,
    family_label,
)

__all__ = [
    "OperatorSpec",
    "HypothesisReport",
    "QEntry",
    "RatioRow",
    "apply_operator",
    "hypothesis_test",
    "DEFAULT_QS",
]

OPERATOR_KINDS = (
    "identity",
    "multiplier",
    "dyadic-expectation",
    "moving-average",
    "truncated-hilbert",
    "hl-maximal",
)

#: Default exponent grid for hypothesis and theorem runs; small q is the
#: interesting regime (the target bound wants some q in (1, infinity) to
#: work, and constants are tamest near 1).
DEFAULT_QS = (1.01, 1.05, 1.1, 1.25, 1.5)

#: A left-hand norm at or below this with a zero right-hand norm is noise,
#: not a violation.
ZERO_NUM_TOL = 1e-12

#: Finite ratios above this multiple of the per-q median are reported.
OUTLIER_FACTOR = 10.0


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """One catalog operator.

    identity             Tf = f
    multiplier           Tf = m f, m a fixed step function
    dyadic-expectation   Tf = mean of f on each dyadic block of 2^level cells
    moving-average       Tf(x) = (2r)^{-1} int_{x-r}^{x+r} f, zero-extended
    truncated-hilbert    Tf(x) = pi^{-1} int_{|x-y|>eps} f(y)/(x-y) dy
    hl-maximal           Tf(x) = sup of average |f| over grid intervals
                         containing x
    """

    kind: str
    level: int = 0
    halfwidth: float = 0.0
    eps: float | None = None
    multiplier: StepFunction | None = None
    multiplier_id: str = "m"

    def __post_init__(self) -> None:
        if self.kind not in OPERATOR_KINDS:
            raise ValueError(
                f"unknown operator kind {self.kind!r}; expected one of {OPERATOR_KINDS}"
            )
        if self.kind == "multiplier" and self.multiplier is None:
            raise ValueError("multiplier operator needs a multiplier function")
        if self.kind == "dyadic-expectation" and self.level < 0:
            raise ValueError(f"dyadic-expectation needs level >= 0, got {self.level}")
        if self.kind == "moving-average" and not self.halfwidth > 0:
            raise ValueError(f"moving-average needs halfwidth > 0, got {self.halfwidth}")

    def label(self) -> str:
        if self.kind == "multiplier":
            return f"multiplier({self.multiplier_id})"
        if self.kind == "dyadic-expectation":
            return f"dyadic-expectation(level={self.level})"
        if self.kind == "moving-average":
            return f"moving-average(r={self.halfwidth:g})"
        if self.kind == "truncated-hilbert":
            eps = "h" if self.eps is None else f"{self.eps:g}"
            return f"truncated-hilbert(eps={eps})"
        return self.kind

    @property
    def is_linear(self) -> bool:
        return self.kind != "hl-maximal"


def _moving_average(f: StepFunction, r: float) -> np.ndarray:
    """Exact window means: the primitive of a step function is piecewise
    linear, so G(t) interpolates the prefix sums and never samples."""
    grid = f.grid
    p = f.prefix()

    def G(t: np.ndarray) -> np.ndarray:
        t = np.clip(t, grid.a, grid.b)
        pos = (t - grid.a) / grid.h
        idx = np.minimum(pos.astype(np.int64), grid.n_cells - 1)
        frac = pos - idx
        return grid.h * (p[idx] + frac * f.values[idx])

    x = grid.midpoints()
    return (G(x + r) - G(x - r)) / (2.0 * r)


def _truncated_hilbert(f: StepFunction, eps: float) -> np.ndarray:
    """pi^{-1} sum_j f_j int over cell_j minus the excluded zone of dy/(x-y).

    Per source cell [y0, y1] and observation point x, the integral of
    1/(x-y) over [p, q] is log|x-p| - log|x-q|; the excluded zone
    (x-eps, x+eps) splits the cell into at most two pieces.  Chunked over
    observation points to keep the n x n kernel blocks small.
    """
    grid = f.grid
    edges = grid.edges()
    y0 = edges[:-1]
    y1 = edges[1:]
    x = grid.midpoints()
    out = np.empty(grid.n_cells)
    chunk = max(1, int(2**22) // max(grid.n_cells, 1))
    for lo in range(0, grid.n_cells, chunk):
        xs = x[lo : lo + chunk, None]
        left_hi = np.minimum(y1[None, :], xs - eps)
        right_lo = np.maximum(y0[None, :], xs + eps)
        with np.errstate(divide="ignore", invalid="ignore"):
            left = np.where(
                left_hi > y0[None, :],
                np.log(np.abs(xs - y0[None, :])) - np.log(np.abs(xs - left_hi)),
                0.0,
            )
            right = np.where(
                y1[None, :] > right_lo,
                np.log(np.abs(xs - right_lo)) - np.log(np.abs(xs - y1[None, :])),
                0.0,
            )
        out[lo : lo + chunk] = (left + right) @ f.values
    return out / math.pi


def _hl_maximal(f: StepFunction, lengths: range | None = None) -> np.ndarray:
    """max over aligned intervals [s, e) covering each cell of avg |f|.

    One trailing-window maximum per interval length: window means by start
    come from prefix sums, and maximum_filter1d with a trailing origin
    spreads each mean to the cells its window covers.
    """
    n = f.grid.n_cells
    p = f.pow_prefix(1.0)
    out = np.abs(f.values).copy()
    for length in lengths if lengths is not None else range(2, n + 1):
        means = (p[length:] - p[:-length]) / length
        padded = np.full(n, -np.inf)
        padded[: len(means)] = means
        covered = maximum_filter1d(
            padded, size=length, mode="constant", cval=-np.inf,
            origin=(length - 1) // 2,
        )
        np.maximum(out, covered, out=out)
    return out


def apply_operator(T: OperatorSpec, f: StepFunction) -> StepFunction:
    """Apply a catalog operator; parameter checks happen here because they
    depend on the grid."""
    grid = f.grid
    if T.kind == "identity":
        return f
    if T.kind == "multiplier":
        m = T.multiplier
        assert m is not None
        if m.grid != grid:
            raise ValueError("multiplier lives on a different grid")
        return StepFunction(grid, m.values * f.values)
    if T.kind == "dyadic-expectation":
        block = 1 << T.level
        if block > grid.n_cells:
            raise ValueError(
                f"dyadic-expectation level {T.level} needs blocks of {block} cells, "
                f"grid has {grid.n_cells}"
            )
        means = f.values.reshape(-1, block).mean(axis=1)
        return StepFunction(grid, np.repeat(means, block))
    if T.kind == "moving-average":
        return StepFunction(grid, _moving_average(f, T.halfwidth))
    if T.kind == "truncated-hilbert":
        eps = grid.h if T.eps is None else T.eps
        if eps < grid.h:
            raise ValueError(
                f"truncated-hilbert needs eps >= grid spacing h={grid.h:g}, got {eps:g}"
            )
        return StepFunction(grid, _truncated_hilbert(f, eps))
    assert T.kind == "hl-maximal"
    return StepFunction(grid, _hl_maximal(f))


# -- hypothesis audit --------------------------------------------------------

@dataclass(frozen=True)
class RatioRow:
    ratio: float
    q: float
    function: str
    interval: GridInterval
    kind: str = "ratio"  # "ratio" | "infinite" | "outlier"


@dataclass(frozen=True)
class QEntry:
    q: float
    best_constant: float
    witness_function: str | None
    witness: GridInterval | None
    median_ratio: float
    n_pairs: int
    n_skipped: int
    n_infinite: int


@dataclass(frozen=True)
class HypothesisReport:
    operator: str
    family: str
    n_cells: int
    per_q: tuple[QEntry, ...]
    worst: tuple[RatioRow, ...]
    violations: tuple[RatioRow, ...]

    def best_constant(self, q: float) -> float:
        for entry in self.per_q:
            if entry.q == q:
                return entry.best_constant
        raise KeyError(f"no entry for q={q}")


def _group_ratios(
    tf: StepFunction, f: StepFunction, length: int, starts: np.ndarray, q: float, h: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(ratio, skip mask, infinite mask) for all intervals of one length."""
    ends = starts + length
    inv = 1.0 / q
    num = (h * tf.range_pow_sum(starts, ends, q)) ** inv
    den = (h * f.range_pow_sum(starts, ends, q)) ** inv
    zero_den = den == 0.0
    skip = zero_den & (num <= ZERO_NUM_TOL)
    infinite = zero_den & ~skip
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(zero_den, np.where(infinite, np.inf, 0.0), num / np.where(zero_den, 1.0, den))
    return ratio, skip, infinite


def _merge_top(
    rows: list[tuple[float, float, int, int, int]],
    cap: int,
) -> list[tuple[float, float, int, int, int]]:
    # row = (ratio, q, f_index, start, end); keep the cap largest with the
    # deterministic tie order (bigger ratio, then smaller q, f, start, end)
    rows.sort(key=lambda r: (-r[0], r[1], r[2], r[3], r[4]))
    return rows[:cap]


def hypothesis_test(
    T: OperatorSpec,
    test_functions: list[StepFunction],
    family: FamilyLike,
    qs: tuple[float, ...] = DEFAULT_QS,
    function_ids: list[str] | None = None,
) -> HypothesisReport:
    """Best local L^q constants for T over the family and test battery.

    Two passes per exponent: the first collects every finite ratio to fix
    the median scale, the second recomputes ratios to flag outliers
    (> 10x median) and assemble the worst-100 table without holding
    per-pair metadata for the whole sweep.
    """
    if not test_functions:
        raise ValueError("hypothesis_test needs at least one test function")
    grid = test_functions[0].grid
    for f in test_functions:
        if f.grid != grid:
            raise ValueError("test functions live on different grids")
    if any(q <= 1.0 for q in qs):
        raise ValueError(f"exponents must satisfy q > 1, got {qs}")
    ids = function_ids or [f"f{i}" for i in range(len(test_functions))]
    if len(ids) != len(test_functions):
        raise ValueError("function_ids length must match test_functions")
    transformed = [apply_operator(T, f) for f in test_functions]
    groups = family_groups(grid, family)
    if not groups:
        raise ValueError("hypothesis_test needs a nonempty interval family")
    h = grid.h

    entries: list[QEntry] = []
    top_rows: list[tuple[float, float, int, int, int]] = []
    violation_rows: list[RatioRow] = []
    for q in qs:
        finite_parts: list[np.ndarray] = []
        n_pairs = 0
        n_skipped = 0
        n_infinite = 0
        best = -math.inf
        best_key: tuple[int, int, int] | None = None  # (f_index, start, end)
        for fi, (f, tf) in enumerate(zip(test_functions, transformed)):
            for length, starts in groups:
                ratio, skip, infinite = _group_ratios(tf, f, length, starts, q, h)
                n_pairs += len(starts)
                n_skipped += int(np.sum(skip))
                n_infinite += int(np.sum(infinite))
                live = ~skip
                if np.any(live & ~infinite):
                    finite_parts.append(ratio[live & ~infinite])
                if np.any(live):
                    masked = np.where(live, ratio, -np.inf)
                    idx = int(np.argmax(masked))
                    val = float(masked[idx])
                    key = (fi, int(starts[idx]), int(starts[idx]) + length)
                    if val > best or (val == best and (best_key is None or key < best_key)):
                        best = val
                        best_key = key
        finite = np.concatenate(finite_parts) if finite_parts else np.array([])
        median = float(np.median(finite)) if len(finite) else math.nan
        cutoff = OUTLIER_FACTOR * median if len(finite) else math.inf

        # second pass: outliers and the worst table
        candidates: list[tuple[float, float, int, int, int]] = []
        for fi, (f, tf) in enumerate(zip(test_functions, transformed)):
            for length, starts in groups:
                ratio, skip, infinite = _group_ratios(tf, f, length, starts, q, h)
                live = ~skip
                flag = infinite | (live & np.isfinite(ratio) & (ratio > cutoff))
                for i in np.flatnonzero(flag):
                    s = int(starts[i])
                    violation_rows.append(
                        RatioRow(
                            ratio=float(ratio[i]),
                            q=q,
                            function=ids[fi],
                            interval=GridInterval(s, s + length),
                            kind="infinite" if infinite[i] else "outlier",
                        )
                    )
                live_idx = np.flatnonzero(live)
                if len(live_idx) > 120:
                    part = live_idx[np.argpartition(-ratio[live_idx], 100)[:100]]
                else:
                    part = live_idx
                for i in part:
                    s = int(starts[i])
                    candidates.append((float(ratio[i]), q, fi, s, s + length))
        top_rows = _merge_top(top_rows + candidates, 100)

        entries.append(
            QEntry(
                q=q,
                best_constant=math.inf if n_infinite else best,
                witness_function=ids[best_key[0]] if best_key is not None else None,
                witness=GridInterval(best_key[1], best_key[2]) if best_key is not None else None,
                median_ratio=median,
                n_pairs=n_pairs,
                n_skipped=n_skipped,
                n_infinite=n_infinite,
            )
        )

    worst = tuple(
        RatioRow(ratio=r, q=q, function=ids[fi], interval=GridInterval(s, e))
        for r, q, fi, s, e in top_rows
    )
    violation_rows.sort(
        key=lambda v: (-v.ratio, v.q, v.function, v.interval.start, v.interval.end)
    )
    return HypothesisReport(
        operator=T.label(),
        family=family_label(family),
        n_cells=grid.n_cells,
        per_q=tuple(entries),
        worst=worst,
        violations=tuple(violation_rows[:100]),
    )
