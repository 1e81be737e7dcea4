"""Scenario files: line-oriented `key = value` with dotted prefixes.

    # characterize a singular weight
    grid.a = -1
    grid.b = 1
    grid.n_cells = 4096
    weight.kind = power
    weight.alpha = -0.5
    family.kind = dyadic+sliding
    family.windows = n/64, n/16, n/4

Blank lines and lines starting with # are ignored.  Every key must be
known, every value must parse, and every referenced kind must exist in
the catalogs; violations raise ScenarioError naming the offending key,
which the CLI turns into exit code 1 before any output file is touched.
Window lengths may be plain cell counts or the forms n and n/k, resolved
against grid.n_cells (and re-resolved per size in convergence studies).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import (
    FAMILY_KINDS,
    FamilyLike,
    Grid,
    IntervalFamilySpec,
    StepFunction,
    make_grid,
)
from .harness import DEFAULT_FUNCTION_IDS, STUDY_QUANTITIES, make_test_function
from .operators import DEFAULT_QS, OPERATOR_KINDS, OperatorSpec
from .weights import WEIGHT_KINDS, Weight, WeightSpec, materialize_weight

__all__ = ["Scenario", "ScenarioError", "parse_scenario", "scenario_from_dict"]


class ScenarioError(ValueError):
    """A scenario problem attributable to one key."""

    def __init__(self, key: str, message: str) -> None:
        self.key = key
        self.message = message
        super().__init__(f"{key}: {message}")


def _parse_float(key: str, raw: str) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise ScenarioError(key, f"expected a number, got {raw!r}") from None
    if not math.isfinite(v):
        raise ScenarioError(key, f"expected a finite number, got {raw!r}")
    return v


def _parse_int(key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ScenarioError(key, f"expected an integer, got {raw!r}") from None


def _parse_list(raw: str) -> list[str]:
    return [tok.strip() for tok in raw.split(",") if tok.strip()]


def _parse_float_list(key: str, raw: str) -> tuple[float, ...]:
    return tuple(_parse_float(key, tok) for tok in _parse_list(raw))


def _parse_int_list(key: str, raw: str) -> tuple[int, ...]:
    return tuple(_parse_int(key, tok) for tok in _parse_list(raw))


def _check_window_token(key: str, tok: str) -> str:
    if tok == "n":
        return tok
    if tok.startswith("n/"):
        div = tok[2:]
        if not div.isdigit() or int(div) == 0:
            raise ScenarioError(key, f"bad window form {tok!r}; use n, n/k, or a cell count")
        return tok
    if not tok.isdigit() or int(tok) == 0:
        raise ScenarioError(key, f"bad window form {tok!r}; use n, n/k, or a cell count")
    return tok


def resolve_window(tok: str, n_cells: int) -> int:
    if tok == "n":
        return n_cells
    if tok.startswith("n/"):
        return max(1, n_cells // int(tok[2:]))
    return int(tok)


@dataclass
class Scenario:
    """Typed scenario plus the raw key/value echo for reports."""

    grid_a: float = -1.0
    grid_b: float = 1.0
    n_cells: int = 1024
    weight_kind: str = "constant"
    weight_c: float = 1.0
    weight_alpha: float = 0.0
    weight_floor: float = 1.0
    weight_values: tuple[float, ...] | None = None
    operator_kind: str = "identity"
    operator_level: int = 0
    operator_halfwidth: float = 0.25
    operator_eps: float | None = None
    operator_multiplier: str = "sign"
    family_kind: str = "dyadic"
    family_windows: tuple[str, ...] = ("n/16",)
    family_stride: int = 1
    family_min_cells: int = 1
    functions: tuple[str, ...] = DEFAULT_FUNCTION_IDS
    functions_custom: tuple[float, ...] | None = None
    qs: tuple[float, ...] = DEFAULT_QS
    p: float = 2.0
    ps: tuple[float, ...] = (1.5, 2.0, 3.0)
    delta: float = 0.5
    deltas: tuple[float, ...] = (0.25, 0.5)
    epsilon: float = 0.5
    c_max: float = 2.0
    delta_hi: float = 4.0
    quantity: str = "a1"
    sizes: tuple[int, ...] = (256, 1024, 4096)
    function: str = "sign"
    seed: int = 1234
    out_dir: str = "."
    raw: dict[str, str] = field(default_factory=dict)

    # -- object construction ---------------------------------------------

    def grid(self) -> Grid:
        try:
            return make_grid(self.grid_a, self.grid_b, self.n_cells)
        except ValueError as e:
            raise ScenarioError("grid.n_cells", str(e)) from None

    def weight_spec(self) -> WeightSpec:
        try:
            if self.weight_kind == "constant":
                return WeightSpec("constant", c=self.weight_c)
            if self.weight_kind == "power":
                return WeightSpec("power", alpha=self.weight_alpha)
            if self.weight_kind == "truncated-power":
                return WeightSpec(
                    "truncated-power", alpha=self.weight_alpha, floor=self.weight_floor
                )
            if self.weight_values is None:
                raise ScenarioError(
                    "weight.values", "custom weight needs explicit cell values"
                )
            return WeightSpec("custom", values=self.weight_values)
        except ScenarioError:
            raise
        except ValueError as e:
            param_key = {
                "constant": "weight.c",
                "power": "weight.alpha",
                "truncated-power": "weight.floor",
                "custom": "weight.values",
            }[self.weight_kind]
            raise ScenarioError(param_key, str(e)) from None

    def weight(self, grid: Grid) -> Weight:
        try:
            return materialize_weight(self.weight_spec(), grid)
        except ScenarioError:
            raise
        except ValueError as e:
            raise ScenarioError("weight.values", str(e)) from None

    def family(self, n_cells: int | None = None) -> FamilyLike:
        n = self.n_cells if n_cells is None else n_cells
        specs: list[IntervalFamilySpec] = []
        try:
            for kind in self.family_kind.split("+"):
                kind = kind.strip()
                if kind == "sliding":
                    windows = tuple(resolve_window(t, n) for t in self.family_windows)
                    specs.append(
                        IntervalFamilySpec(
                            "sliding", windows=windows, stride=self.family_stride
                        )
                    )
                elif kind == "dyadic":
                    specs.append(
                        IntervalFamilySpec("dyadic", min_cells=self.family_min_cells)
                    )
                elif kind == "all-aligned":
                    specs.append(IntervalFamilySpec("all-aligned"))
                else:
                    raise ScenarioError(
                        "family.kind",
                        f"unknown family kind {kind!r}; expected one of {FAMILY_KINDS}",
                    )
        except ScenarioError:
            raise
        except ValueError as e:
            raise ScenarioError("family.kind", str(e)) from None
        return specs if len(specs) > 1 else specs[0]

    def test_function(self, function_id: str, grid: Grid) -> StepFunction:
        if function_id == "custom":
            if self.functions_custom is None:
                raise ScenarioError(
                    "functions.custom", "custom test function has no values"
                )
            vals = np.asarray(self.functions_custom)
            if len(vals) != grid.n_cells:
                raise ScenarioError(
                    "functions.custom",
                    f"{len(vals)} values for a grid of {grid.n_cells} cells",
                )
            return StepFunction(grid, vals)
        try:
            return make_test_function(function_id, grid, self.seed)
        except ValueError as e:
            raise ScenarioError("functions", str(e)) from None

    def test_functions(self, grid: Grid) -> tuple[list[str], list[StepFunction]]:
        ids = list(self.functions)
        return ids, [self.test_function(fid, grid) for fid in ids]

    def operator(self, grid: Grid) -> OperatorSpec:
        kind = self.operator_kind
        try:
            if kind == "multiplier":
                m = self.test_function(self.operator_multiplier, grid)
                return OperatorSpec(
                    "multiplier", multiplier=m, multiplier_id=self.operator_multiplier
                )
            if kind == "dyadic-expectation":
                return OperatorSpec(kind, level=self.operator_level)
            if kind == "moving-average":
                return OperatorSpec(kind, halfwidth=self.operator_halfwidth)
            if kind == "truncated-hilbert":
                return OperatorSpec(kind, eps=self.operator_eps)
            return OperatorSpec(kind)
        except ScenarioError:
            raise
        except ValueError as e:
            raise ScenarioError("operator.kind", str(e)) from None


def _apply(sc: Scenario, key: str, raw: str) -> None:
    if key == "grid.a":
        sc.grid_a = _parse_float(key, raw)
    elif key == "grid.b":
        sc.grid_b = _parse_float(key, raw)
    elif key == "grid.n_cells":
        sc.n_cells = _parse_int(key, raw)
    elif key == "weight.kind":
        if raw not in WEIGHT_KINDS:
            raise ScenarioError(key, f"unknown weight kind {raw!r}; expected one of {WEIGHT_KINDS}")
        sc.weight_kind = raw
    elif key == "weight.c":
        sc.weight_c = _parse_float(key, raw)
    elif key == "weight.alpha":
        sc.weight_alpha = _parse_float(key, raw)
    elif key == "weight.floor":
        sc.weight_floor = _parse_float(key, raw)
    elif key == "weight.values":
        sc.weight_values = _parse_float_list(key, raw)
    elif key == "operator.kind":
        if raw not in OPERATOR_KINDS:
            raise ScenarioError(key, f"unknown operator kind {raw!r}; expected one of {OPERATOR_KINDS}")
        sc.operator_kind = raw
    elif key == "operator.level":
        sc.operator_level = _parse_int(key, raw)
        if sc.operator_level < 0:
            raise ScenarioError(key, f"must be >= 0, got {raw!r}")
    elif key == "operator.halfwidth":
        sc.operator_halfwidth = _parse_float(key, raw)
        if not sc.operator_halfwidth > 0:
            raise ScenarioError(key, f"must be positive, got {raw!r}")
    elif key == "operator.eps":
        sc.operator_eps = _parse_float(key, raw)
        if not sc.operator_eps > 0:
            raise ScenarioError(key, f"must be positive, got {raw!r}")
    elif key == "operator.multiplier":
        sc.operator_multiplier = raw
    elif key == "family.kind":
        sc.family_kind = raw
    elif key == "family.windows":
        toks = _parse_list(raw)
        if not toks:
            raise ScenarioError(key, "needs at least one window")
        sc.family_windows = tuple(_check_window_token(key, t) for t in toks)
    elif key == "family.stride":
        sc.family_stride = _parse_int(key, raw)
    elif key == "family.min_cells":
        sc.family_min_cells = _parse_int(key, raw)
    elif key == "functions":
        ids = tuple(_parse_list(raw))
        if not ids:
            raise ScenarioError(key, "needs at least one function id")
        sc.functions = ids
    elif key == "functions.custom":
        sc.functions_custom = _parse_float_list(key, raw)
    elif key == "qs":
        qs = _parse_float_list(key, raw)
        if not qs or any(q <= 1.0 for q in qs):
            raise ScenarioError(key, f"exponents must all be > 1, got {raw!r}")
        sc.qs = qs
    elif key == "p":
        sc.p = _parse_float(key, raw)
        if not sc.p > 1.0:
            raise ScenarioError(key, f"must be > 1, got {raw!r}")
    elif key == "ps":
        sc.ps = _parse_float_list(key, raw)
        if not sc.ps or any(p <= 1.0 for p in sc.ps):
            raise ScenarioError(key, f"exponents must all be > 1, got {raw!r}")
    elif key == "delta":
        sc.delta = _parse_float(key, raw)
        if not sc.delta > 0:
            raise ScenarioError(key, f"must be positive, got {raw!r}")
    elif key == "deltas":
        sc.deltas = _parse_float_list(key, raw)
        if not sc.deltas or any(d <= 0 for d in sc.deltas):
            raise ScenarioError(key, f"values must all be positive, got {raw!r}")
    elif key == "epsilon":
        sc.epsilon = _parse_float(key, raw)
    elif key == "c_max":
        sc.c_max = _parse_float(key, raw)
        if not sc.c_max > 1.0:
            raise ScenarioError(key, f"must be > 1, got {raw!r}")
    elif key == "delta_hi":
        sc.delta_hi = _parse_float(key, raw)
        if not sc.delta_hi > 0:
            raise ScenarioError(key, f"must be positive, got {raw!r}")
    elif key == "quantity":
        sc.quantity = raw
    elif key == "sizes":
        sc.sizes = _parse_int_list(key, raw)
    elif key == "function":
        sc.function = raw
    elif key == "seed":
        sc.seed = _parse_int(key, raw)
    elif key == "out.dir":
        sc.out_dir = raw
    else:
        raise ScenarioError(key, "unknown key")


def scenario_from_dict(pairs: dict[str, str]) -> Scenario:
    sc = Scenario()
    for key, raw in pairs.items():
        _apply(sc, key, raw)
    sc.raw = dict(pairs)
    _validate(sc)
    return sc


def _validate(sc: Scenario) -> None:
    if sc.n_cells < 2 or (sc.n_cells & (sc.n_cells - 1)) != 0:
        raise ScenarioError(
            "grid.n_cells", f"must be a power of two >= 2, got {sc.n_cells}"
        )
    if not sc.grid_b > sc.grid_a:
        raise ScenarioError("grid.b", f"needs b > a, got a={sc.grid_a}, b={sc.grid_b}")
    for fid in sc.functions:
        if fid != "custom" and fid != "const-1" and fid != "sign" and fid != "indicator":
            if not (fid.startswith("random-") and fid.split("-", 1)[1].isdigit()):
                raise ScenarioError("functions", f"unknown test function {fid!r}")
    if sc.function != "custom" and sc.function not in sc.functions:
        # the single-function commands may name anything valid, not just
        # the battery; validate its form the same way
        fid = sc.function
        if fid not in ("sign", "indicator", "const-1") and not (
            fid.startswith("random-") and fid.split("-", 1)[1].isdigit()
        ):
            raise ScenarioError("function", f"unknown test function {fid!r}")
    if not (0.0 < sc.epsilon < 1.0):
        raise ScenarioError("epsilon", f"must be in (0, 1), got {sc.epsilon}")
    if sc.quantity not in STUDY_QUANTITIES:
        raise ScenarioError("quantity", f"unknown study quantity {sc.quantity!r}")
    for n in sc.sizes:
        if n < 2 or (n & (n - 1)) != 0:
            raise ScenarioError("sizes", f"sizes must be powers of two >= 2, got {n}")
    if sc.family_stride <= 0:
        raise ScenarioError("family.stride", f"must be positive, got {sc.family_stride}")
    if sc.family_min_cells < 1 or (sc.family_min_cells & (sc.family_min_cells - 1)) != 0:
        raise ScenarioError(
            "family.min_cells", f"must be a power of two >= 1, got {sc.family_min_cells}"
        )
    # force family and weight-spec construction once so kind and parameter
    # errors surface at parse time, named by key
    sc.family()
    sc.weight_spec()


def parse_scenario(path: str) -> Scenario:
    pairs: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as e:
        raise ScenarioError("scenario", f"cannot read {path}: {e.strerror}") from None
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if "=" not in text:
            raise ScenarioError(
                f"line {lineno}", f"expected key = value, got {text!r}"
            )
        key, _, raw = text.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key in pairs:
            raise ScenarioError(key, f"duplicate key (line {lineno})")
        pairs[key] = raw
    return scenario_from_dict(pairs)
