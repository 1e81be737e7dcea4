"""Uniform grids, exact step functions, and interval families.

Everything downstream works with step functions that are constant on the
cells of a uniform grid over [a, b).  All integrals are finite sums

    int_I f = h * sum(values[s:e]),    I = [a + s*h, a + e*h),

so equalities that hold in exact arithmetic hold here up to float64
rounding and nothing else.  Interval endpoints are always cell edges;
an interval is stored as the half-open cell index range [start, end).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Grid",
    "StepFunction",
    "GridInterval",
    "IntervalFamilySpec",
    "make_grid",
    "step_function",
    "enumerate_family",
    "refine_family",
    "family_label",
    "integrate",
    "average",
    "lq_norm_local",
    "ess_inf",
    "sup_norm",
]

#: Relative tolerance used by exactness-style checks across the package,
#: with an absolute floor for quantities near zero.
REL_TOL = 1e-9
ABS_FLOOR = 1e-12

#: Cell-count bound for the all-aligned family in O(n^2)-interval
#: functionals (oscillation scans and friends).  Above this the quadratic
#: sweep is too slow to be useful; callers should switch to dyadic or
#: sliding families instead.
ALL_ALIGNED_LIMIT = 1024


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [a, b) with a power-of-two number of cells."""

    a: float
    b: float
    n_cells: int

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n_cells

    def edges(self) -> np.ndarray:
        return self.a + (self.b - self.a) * np.arange(self.n_cells + 1) / self.n_cells

    def midpoints(self) -> np.ndarray:
        e = self.edges()
        return 0.5 * (e[:-1] + e[1:])

    def refined(self, factor: int = 4) -> "Grid":
        return Grid(self.a, self.b, self.n_cells * factor)


def make_grid(a: float, b: float, n_cells: int) -> Grid:
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError(f"grid endpoints must be finite, got a={a}, b={b}")
    if not (b > a):
        raise ValueError(f"grid needs b > a, got a={a}, b={b}")
    if n_cells < 2 or not _is_pow2(n_cells):
        raise ValueError(f"n_cells must be a power of two >= 2, got {n_cells}")
    return Grid(float(a), float(b), int(n_cells))


@dataclass(frozen=True, order=True)
class GridInterval:
    """Half-open cell index range [start, end) on some grid."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise ValueError(f"bad interval [{self.start}, {self.end})")

    @property
    def n_cells(self) -> int:
        return self.end - self.start

    def measure(self, grid: Grid) -> float:
        return self.n_cells * grid.h

    def x_left(self, grid: Grid) -> float:
        return grid.a + self.start * grid.h

    def x_right(self, grid: Grid) -> float:
        return grid.a + self.end * grid.h

    def scaled(self, factor: int) -> "GridInterval":
        return GridInterval(self.start * factor, self.end * factor)

    def describe(self, grid: Grid) -> str:
        return f"[{self.x_left(grid):.6g}, {self.x_right(grid):.6g})"


class StepFunction:
    """A float64 value per grid cell, immutable once built.

    Interval statistics (sums, absolute power sums, minima) are cached
    lazily: prefix sums give O(1) sums over any cell range, and a sparse
    table gives O(1) range minima.  Cache keys are the power q for the
    |f|^q prefixes.
    """

    __slots__ = ("grid", "values", "_prefix", "_pow_prefix", "_min_table", "_log2")

    def __init__(self, grid: Grid, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (grid.n_cells,):
            raise ValueError(
                f"need {grid.n_cells} cell values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("cell values must be finite")
        values = values.copy()
        values.setflags(write=False)
        self.grid = grid
        self.values = values
        self._prefix: np.ndarray | None = None
        self._pow_prefix: dict[float, np.ndarray] = {}
        self._min_table: list[np.ndarray] | None = None
        self._log2: np.ndarray | None = None

    # -- cached statistics ------------------------------------------------

    def prefix(self) -> np.ndarray:
        """P with P[k] = sum(values[:k]); sums over [s, e) are P[e] - P[s]."""
        if self._prefix is None:
            p = np.zeros(self.grid.n_cells + 1)
            np.cumsum(self.values, out=p[1:])
            self._prefix = p
        return self._prefix

    def pow_prefix(self, q: float) -> np.ndarray:
        """Prefix sums of |values|^q."""
        key = float(q)
        got = self._pow_prefix.get(key)
        if got is None:
            p = np.zeros(self.grid.n_cells + 1)
            np.cumsum(np.abs(self.values) ** key, out=p[1:])
            self._pow_prefix[key] = p
            got = p
        return got

    def _ensure_min_table(self) -> None:
        if self._min_table is not None:
            return
        n = self.grid.n_cells
        levels = max(1, n.bit_length())
        table = [self.values]
        for j in range(1, levels):
            half = 1 << (j - 1)
            prev = table[-1]
            if len(prev) <= half:
                break
            table.append(np.minimum(prev[:-half], prev[half:]))
        log2 = np.zeros(n + 1, dtype=np.int64)
        for i in range(2, n + 1):
            log2[i] = log2[i // 2] + 1
        self._min_table = table
        self._log2 = log2

    def range_min(self, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
        """Minimum of values over each [s, e); classic sparse-table lookup."""
        self._ensure_min_table()
        assert self._min_table is not None and self._log2 is not None
        starts = np.asarray(starts, dtype=np.int64)
        ends = np.asarray(ends, dtype=np.int64)
        j = self._log2[ends - starts]
        out = np.empty(len(starts))
        for level in np.unique(j):
            row = self._min_table[level]
            m = j == level
            s, e = starts[m], ends[m]
            out[m] = np.minimum(row[s], row[e - (1 << int(level))])
        return out

    def range_sum(self, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
        p = self.prefix()
        return p[ends] - p[starts]

    def range_pow_sum(self, starts: np.ndarray, ends: np.ndarray, q: float) -> np.ndarray:
        p = self.pow_prefix(q)
        return p[ends] - p[starts]


def step_function(grid: Grid, values: Iterable[float] | np.ndarray) -> StepFunction:
    return StepFunction(grid, np.asarray(list(values) if not isinstance(values, np.ndarray) else values))


# -- interval families ----------------------------------------------------

FAMILY_KINDS = ("all-aligned", "dyadic", "sliding")


@dataclass(frozen=True)
class IntervalFamilySpec:
    """Recipe for a family of grid intervals.

    kind "all-aligned": every [s, e), n(n+1)/2 intervals.
    kind "dyadic": the dyadic tree down to blocks of min_cells cells.
    kind "sliding": fixed window lengths swept with a stride.
    """

    kind: str
    windows: tuple[int, ...] = ()
    stride: int = 1
    min_cells: int = 1

    def __post_init__(self) -> None:
        if self.kind not in FAMILY_KINDS:
            raise ValueError(
                f"unknown family kind {self.kind!r}; expected one of {FAMILY_KINDS}"
            )
        if self.kind == "sliding":
            if not self.windows:
                raise ValueError("sliding family needs at least one window length")
            if any(w <= 0 for w in self.windows):
                raise ValueError(f"window lengths must be positive, got {self.windows}")
            if self.stride <= 0:
                raise ValueError(f"stride must be positive, got {self.stride}")
        if self.kind == "dyadic" and not _is_pow2(self.min_cells):
            raise ValueError(f"min_cells must be a power of two, got {self.min_cells}")


FamilyLike = IntervalFamilySpec | Sequence[IntervalFamilySpec] | Sequence[GridInterval]


def _length_groups(grid: Grid, spec: IntervalFamilySpec) -> list[tuple[int, np.ndarray]]:
    """(length, sorted start offsets) groups; the workhorse layout for sweeps."""
    n = grid.n_cells
    groups: list[tuple[int, np.ndarray]] = []
    if spec.kind == "all-aligned":
        for length in range(1, n + 1):
            groups.append((length, np.arange(0, n - length + 1, dtype=np.int64)))
    elif spec.kind == "dyadic":
        length = n
        while length >= spec.min_cells:
            groups.append((length, np.arange(0, n, length, dtype=np.int64)))
            if length == 1:
                break
            length //= 2
    else:
        for length in sorted(set(spec.windows)):
            if length > n:
                raise ValueError(
                    f"window of {length} cells does not fit a grid of {n} cells"
                )
            groups.append((length, np.arange(0, n - length + 1, spec.stride, dtype=np.int64)))
    return groups


def _as_specs(family: FamilyLike) -> list[IntervalFamilySpec] | None:
    if isinstance(family, IntervalFamilySpec):
        return [family]
    family = list(family)  # type: ignore[arg-type]
    if family and isinstance(family[0], IntervalFamilySpec):
        return family  # type: ignore[return-value]
    return None


def family_groups(grid: Grid, family: FamilyLike) -> list[tuple[int, np.ndarray]]:
    """Deduplicated (length, starts) groups for a spec, union of specs, or
    explicit interval list, in deterministic (length, start) order."""
    specs = _as_specs(family)
    if specs is not None:
        merged: dict[int, set[int]] = {}
        for spec in specs:
            for length, starts in _length_groups(grid, spec):
                merged.setdefault(length, set()).update(starts.tolist())
        return [
            (length, np.array(sorted(merged[length]), dtype=np.int64))
            for length in sorted(merged)
        ]
    merged = {}
    for iv in family:  # type: ignore[union-attr]
        if iv.end > grid.n_cells:
            raise ValueError(f"interval {iv} exceeds grid of {grid.n_cells} cells")
        merged.setdefault(iv.n_cells, set()).add(iv.start)
    return [
        (length, np.array(sorted(merged[length]), dtype=np.int64))
        for length in sorted(merged)
    ]


def enumerate_family(grid: Grid, family: FamilyLike) -> list[GridInterval]:
    """All intervals of the family, ordered by (start, end), no duplicates."""
    out = [
        GridInterval(int(s), int(s) + length)
        for length, starts in family_groups(grid, family)
        for s in starts
    ]
    out.sort()
    return out


def refine_family(family: FamilyLike, factor: int = 4) -> FamilyLike:
    """The matching family on a grid refined by `factor`.

    Specs keep their meaning (sliding windows scale so the physical
    window stays put; dyadic and all-aligned re-enumerate, which only
    adds finer intervals).  Explicit interval lists scale their indices,
    which pins the same physical intervals on the finer grid.
    """
    specs = _as_specs(family)
    if specs is not None:
        out = []
        for spec in specs:
            if spec.kind == "sliding":
                out.append(
                    IntervalFamilySpec(
                        "sliding",
                        windows=tuple(w * factor for w in spec.windows),
                        stride=spec.stride,
                    )
                )
            elif spec.kind == "dyadic":
                out.append(IntervalFamilySpec("dyadic", min_cells=spec.min_cells))
            else:
                out.append(spec)
        return out if len(out) > 1 else out[0]
    return [iv.scaled(factor) for iv in family]  # type: ignore[union-attr]


def family_label(family: FamilyLike) -> str:
    """Stable human-readable identity, used to keep paired functionals honest."""
    specs = _as_specs(family)
    if specs is None:
        ivs = list(family)  # type: ignore[arg-type]
        return f"explicit({len(ivs)} intervals)"
    parts = []
    for spec in specs:
        if spec.kind == "sliding":
            w = ",".join(str(x) for x in spec.windows)
            parts.append(f"sliding(w={w};stride={spec.stride})")
        elif spec.kind == "dyadic":
            parts.append(
                "dyadic" if spec.min_cells == 1 else f"dyadic(min_cells={spec.min_cells})"
            )
        else:
            parts.append("all-aligned")
    return " + ".join(parts)


def check_all_aligned_budget(grid: Grid, family: FamilyLike, functional: str) -> None:
    """The all-aligned family in an O(n^2)-interval functional is capped."""
    specs = _as_specs(family)
    if specs is None:
        return
    for spec in specs:
        if spec.kind == "all-aligned" and grid.n_cells > ALL_ALIGNED_LIMIT:
            raise ValueError(
                f"{functional}: all-aligned family is limited to "
                f"{ALL_ALIGNED_LIMIT} cells (grid has {grid.n_cells}); "
                f"use a dyadic or sliding family instead"
            )


# -- basic functionals -----------------------------------------------------

def _check_same_grid(f: StepFunction, I: GridInterval) -> None:
    if I.end > f.grid.n_cells:
        raise ValueError(
            f"interval [{I.start}, {I.end}) exceeds grid of {f.grid.n_cells} cells"
        )


def integrate(f: StepFunction, I: GridInterval) -> float:
    """int_I f, exactly h * sum of the covered cell values."""
    _check_same_grid(f, I)
    p = f.prefix()
    return f.grid.h * float(p[I.end] - p[I.start])


def average(f: StepFunction, I: GridInterval) -> float:
    """|I|^{-1} int_I f; h cancels, leaving a plain mean of cell values."""
    _check_same_grid(f, I)
    p = f.prefix()
    return float(p[I.end] - p[I.start]) / I.n_cells


def lq_norm_local(f: StepFunction, I: GridInterval, q: float) -> float:
    """(int_I |f|^q)^{1/q} for q >= 1."""
    if q < 1.0:
        raise ValueError(f"lq_norm_local needs q >= 1, got q={q}")
    _check_same_grid(f, I)
    p = f.pow_prefix(q)
    return float(f.grid.h * (p[I.end] - p[I.start])) ** (1.0 / q)


def ess_inf(f: StepFunction, I: GridInterval) -> float:
    """Essential infimum over I; for step functions the min cell value."""
    _check_same_grid(f, I)
    return float(
        f.range_min(np.array([I.start], dtype=np.int64), np.array([I.end], dtype=np.int64))[0]
    )


def sup_norm(f: StepFunction) -> float:
    return float(np.max(np.abs(f.values)))


# -- argmax bookkeeping -----------------------------------------------------

class BestTracker:
    """Running sup with the tie rule: strictly larger wins, exact ties go to
    the interval with the smaller start, then the smaller end."""

    __slots__ = ("value", "interval", "tag")

    def __init__(self) -> None:
        self.value = -math.inf
        self.interval: GridInterval | None = None
        self.tag: str | None = None

    def offer(self, value: float, interval: GridInterval, tag: str | None = None) -> None:
        if np.isnan(value):
            return
        if self.interval is None or value > self.value:
            self.value, self.interval, self.tag = value, interval, tag
            return
        if value == self.value and (interval.start, interval.end) < (
            self.interval.start,
            self.interval.end,
        ):
            self.interval, self.tag = interval, tag

    def offer_group(
        self,
        values: np.ndarray,
        starts: np.ndarray,
        length: int,
        tag: str | None = None,
    ) -> None:
        """Offer a whole (length, starts) group at once; starts are sorted,
        so the first index attaining the group max has the smallest start."""
        if len(values) == 0:
            return
        finite_max = np.max(values)
        if np.isnan(finite_max):
            good = ~np.isnan(values)
            if not np.any(good):
                return
            finite_max = np.max(values[good])
            idx = int(np.argmax(np.where(good, values, -np.inf)))
        else:
            idx = int(np.argmax(values))
        s = int(starts[idx])
        self.offer(float(finite_max), GridInterval(s, s + length), tag)
