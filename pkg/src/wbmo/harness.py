"""End-to-end audit of the oscillation bound for weighted L-infinity data.

The target estimate: for a weight u with finite A_1 characteristic and an
operator T with uniform local L^q control, functions of the form f u with
bounded f should have T(f u) of bounded mean oscillation relative to u,

    osc(T(fu), I)  <=  2 C_hyp C_rhi ||f||_inf I(u)    for every I,

with I(u) the average of u over I.  The harness walks the inequality
chain one step at a time,

    s0 = osc(T(fu), I)
    s1 = 2 I(|T(fu)|)
    s2 = 2 I(|T(fu)|^q)^{1/q}
    s3 = 2 C_hyp I(|fu|^q)^{1/q}
    s4 = 2 C_hyp ||f||_inf I(u^q)^{1/q}
    s5 = 2 C_hyp C_rhi ||f||_inf I(u),

so a failure localizes: s0<=s1<=s2 are unconditional (triangle inequality
and power-mean monotonicity), s2<=s3 holds when C_hyp really is a local
L^q constant for T on fu, s3<=s4 factors out the sup norm, and s4<=s5 is
the reverse Holder step at exponent q = 1 + delta.  On step functions
every s_i is an exact finite sum, so the margins measure mathematics, not
quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bmo import _osc_by_start, oscillation, sharp_norm_ratio, bmo_u_seminorm
from .grid import (
    FamilyLike,
    Grid,
    GridInterval,
    StepFunction,
    check_all_aligned_budget,
    family_groups,
    family_label,
    make_grid,
    refine_family,
    sup_norm,
)
from .operators import (
    DEFAULT_QS,
    HypothesisReport,
    OperatorSpec,
    apply_operator,
    hypothesis_test,
)
from .weights import (
    RhiReport,
    Weight,
    WeightSpec,
    a1_characteristic,
    ap_characteristic,
    materialize_weight,
    refine_weight,
    rhi_constant,
    transform_weight,
)

__all__ = [
    "ChainAuditReport",
    "MarginScan",
    "TheoremReport",
    "ConvergenceReport",
    "ConvergenceRow",
    "default_test_functions",
    "make_test_function",
    "chain_audit",
    "margin_scan",
    "theorem_verify",
    "convergence_study",
    "DEFAULT_FUNCTION_IDS",
]

#: Margins are judged against a relative tolerance with an absolute floor.
MARGIN_RTOL = 1e-9
MARGIN_ATOL = 1e-12

#: Relative change under one 4x refinement below which the A_1 gate holds.
GATE_RTOL = 0.05

#: Normalized growth per 4x refinement at or above which a study is
#: called divergent.
DIVERGENT_GROWTH = 1.5

DEFAULT_FUNCTION_IDS = ("sign", "indicator", "random-1", "random-2", "random-3", "const-1")


def make_test_function(function_id: str, grid: Grid, seed: int = 1234) -> StepFunction:
    """The standard battery, by name; all exact cell averages.

    sign        sign(x), cell average (|x1| - |x0|) / h
    indicator   indicator of [0, 1], cell average = overlap fraction
    random-k    iid uniform cell values in [-1, 1], child seed (seed, k)
    const-1     1 everywhere
    """
    edges = grid.edges()
    if function_id == "sign":
        vals = np.diff(np.abs(edges)) / grid.h
    elif function_id == "indicator":
        overlap = np.minimum(edges[1:], 1.0) - np.maximum(edges[:-1], 0.0)
        vals = np.maximum(overlap, 0.0) / grid.h
    elif function_id == "const-1":
        vals = np.ones(grid.n_cells)
    elif function_id.startswith("random-"):
        k = int(function_id.split("-", 1)[1])
        rng = np.random.default_rng([seed, k])
        vals = rng.uniform(-1.0, 1.0, grid.n_cells)
    else:
        raise ValueError(f"unknown test function {function_id!r}")
    return StepFunction(grid, vals)


def default_test_functions(grid: Grid, seed: int = 1234) -> tuple[list[str], list[StepFunction]]:
    ids = list(DEFAULT_FUNCTION_IDS)
    return ids, [make_test_function(fid, grid, seed) for fid in ids]


# -- single-triple audit ------------------------------------------------------

@dataclass(frozen=True)
class ChainAuditReport:
    s: tuple[float, float, float, float, float, float]
    margins: tuple[float, float, float, float, float]
    passed: bool
    q: float
    c_hyp: float
    c_rhi: float
    interval: GridInterval
    function: str
    operator: str
    weight: str


def _margins_ok(s: tuple[float, ...]) -> tuple[tuple[float, ...], bool]:
    margins = []
    ok = True
    for i in range(len(s) - 1):
        m = s[i + 1] - s[i]
        tol = MARGIN_RTOL * max(abs(s[i]), abs(s[i + 1])) + MARGIN_ATOL
        margins.append(m)
        if m < -tol:
            ok = False
    return tuple(margins), ok


def chain_audit(
    T: OperatorSpec,
    u: Weight,
    f: StepFunction,
    I: GridInterval,
    q: float,
    c_hyp: float,
    c_rhi: float,
    function_id: str = "f",
) -> ChainAuditReport:
    """Evaluate s0..s5 for one (f, I, q) and check each step's margin.

    The caller owns the meaning of c_hyp and c_rhi: the conditional steps
    only deserve to pass when c_hyp is a local L^q constant valid for the
    product fu on I's family and c_rhi is a reverse Holder constant for u
    at delta = q - 1 over the same family.
    """
    if q <= 1.0:
        raise ValueError(f"chain_audit needs q > 1, got q={q}")
    grid = u.grid
    if f.grid != grid:
        raise ValueError("function and weight live on different grids")
    fu = StepFunction(grid, f.values * u.f.values)
    tfu = apply_operator(T, fu)
    L = I.n_cells
    delta = q - 1.0
    uq, _ = transform_weight(u, 1.0 + delta)
    supf = sup_norm(f)

    s0 = oscillation(tfu, I)
    s1 = 2.0 * float(tfu.range_pow_sum(np.array([I.start]), np.array([I.end]), 1.0)[0]) / L
    s2 = 2.0 * (float(tfu.range_pow_sum(np.array([I.start]), np.array([I.end]), q)[0]) / L) ** (1.0 / q)
    s3 = c_hyp * 2.0 * (float(fu.range_pow_sum(np.array([I.start]), np.array([I.end]), q)[0]) / L) ** (1.0 / q)
    s4 = c_hyp * 2.0 * supf * (float(uq.f.range_sum(np.array([I.start]), np.array([I.end]))[0]) / L) ** (1.0 / q)
    s5 = c_hyp * c_rhi * 2.0 * supf * float(u.f.range_sum(np.array([I.start]), np.array([I.end]))[0]) / L

    s = (s0, s1, s2, s3, s4, s5)
    margins, ok = _margins_ok(s)
    return ChainAuditReport(
        s=s,
        margins=margins,  # type: ignore[arg-type]
        passed=ok,
        q=q,
        c_hyp=c_hyp,
        c_rhi=c_rhi,
        interval=I,
        function=function_id,
        operator=T.label(),
        weight=u.label,
    )


# -- bulk margin scan ----------------------------------------------------------

@dataclass(frozen=True)
class MarginScan:
    """Chain margins over every (f, I) of a family at one exponent q."""

    q: float
    c_hyp: float
    c_rhi: float
    n_triples: int
    n_failures: int
    min_margins: tuple[float, float, float, float, float]
    worst_margin: float  # most negative relative margin seen
    worst_margin_step: int | None
    worst_margin_function: str | None
    worst_margin_interval: GridInterval | None
    empirical_constant: float
    empirical_function: str | None
    empirical_witness: GridInterval | None


def margin_scan(
    T: OperatorSpec,
    u: Weight,
    fs: list[StepFunction],
    ids: list[str],
    family: FamilyLike,
    q: float,
    c_hyp: float,
    c_rhi: float,
) -> MarginScan:
    """chain_audit over every (f, I) of the family at once.

    Same arithmetic as chain_audit, vectorized per interval length; the
    same caveat applies about where c_hyp and c_rhi must come from.  Also
    tracks the empirical mapping constant max s0 / (||f||_inf I(u)).
    """
    grid = u.grid
    delta = q - 1.0
    uq, _ = transform_weight(u, 1.0 + delta)
    groups = family_groups(grid, family)
    up = u.f.prefix()
    uqp = uq.f.prefix()
    inv = 1.0 / q

    n_triples = 0
    n_failures = 0
    min_margins = [math.inf] * 5
    worst_rel = math.inf
    worst_step: int | None = None
    worst_fid: str | None = None
    worst_iv: GridInterval | None = None
    emp_best = -math.inf
    emp_fid: str | None = None
    emp_iv: GridInterval | None = None

    for fid, f in zip(ids, fs):
        fu = StepFunction(grid, f.values * u.f.values)
        tfu = apply_operator(T, fu)
        ptfu = tfu.prefix()
        supf = sup_norm(f)
        for length, starts in groups:
            ends = starts + length
            n_triples += len(starts)
            s0 = _osc_by_start(tfu.values, ptfu, length, starts)
            s1 = 2.0 * tfu.range_pow_sum(starts, ends, 1.0) / length
            s2 = 2.0 * (tfu.range_pow_sum(starts, ends, q) / length) ** inv
            s3 = c_hyp * 2.0 * (fu.range_pow_sum(starts, ends, q) / length) ** inv
            s4 = c_hyp * 2.0 * supf * ((uqp[ends] - uqp[starts]) / length) ** inv
            avg_u = (up[ends] - up[starts]) / length
            s5 = c_hyp * c_rhi * 2.0 * supf * avg_u
            stack = np.stack([s0, s1, s2, s3, s4, s5])
            diffs = stack[1:] - stack[:-1]
            scale = np.maximum(np.abs(stack[1:]), np.abs(stack[:-1]))
            tol = MARGIN_RTOL * scale + MARGIN_ATOL
            bad = diffs < -tol
            n_failures += int(np.sum(np.any(bad, axis=0)))
            for step in range(5):
                step_min = float(np.min(diffs[step]))
                if step_min < min_margins[step]:
                    min_margins[step] = step_min
                rel = diffs[step] / (scale[step] + MARGIN_ATOL)
                idx = int(np.argmin(rel))
                if float(rel[idx]) < worst_rel:
                    worst_rel = float(rel[idx])
                    worst_step = step
                    worst_fid = fid
                    worst_iv = GridInterval(int(starts[idx]), int(starts[idx]) + length)
            if supf > 0:
                pos = avg_u > 0
                with np.errstate(divide="ignore", invalid="ignore"):
                    emp = np.where(pos, s0 / np.where(pos, supf * avg_u, 1.0), -np.inf)
                idx = int(np.argmax(emp))
                if float(emp[idx]) > emp_best:
                    emp_best = float(emp[idx])
                    emp_fid = fid
                    emp_iv = GridInterval(int(starts[idx]), int(starts[idx]) + length)

    return MarginScan(
        q=q,
        c_hyp=c_hyp,
        c_rhi=c_rhi,
        n_triples=n_triples,
        n_failures=n_failures,
        min_margins=tuple(min_margins),  # type: ignore[arg-type]
        worst_margin=worst_rel,
        worst_margin_step=worst_step,
        worst_margin_function=worst_fid,
        worst_margin_interval=worst_iv,
        empirical_constant=emp_best if emp_best > -math.inf else 0.0,
        empirical_function=emp_fid,
        empirical_witness=emp_iv,
    )


# -- full verification --------------------------------------------------------

@dataclass(frozen=True)
class TheoremReport:
    verdict: str  # "holds" | "violated" | "hypothesis-failed"
    q_used: float | None
    c_hyp: float | None
    c_rhi: float | None
    predicted_bound: float | None
    empirical_constant: float
    empirical_function: str | None
    empirical_witness: GridInterval | None
    a1_value: float
    a1_refined: float
    n_triples: int
    n_margin_failures: int
    min_margins: tuple[float, float, float, float, float] | None
    worst_margin: float
    worst_margin_step: int | None
    worst_margin_function: str | None
    worst_margin_interval: GridInterval | None
    hypothesis: HypothesisReport | None
    rhi: RhiReport | None
    operator: str
    weight: str
    family: str
    n_cells: int
    diagnostics: str = ""


def _a1_gate(u: Weight, family: FamilyLike) -> tuple[float, float]:
    base = a1_characteristic(u, family).value
    fine = a1_characteristic(refine_weight(u, 4), refine_family(family, 4)).value
    if not (math.isfinite(base) and math.isfinite(fine)):
        raise ValueError(
            f"weight {u.label} fails the A_1 gate: characteristic is not finite "
            f"({base:g} on the base grid, {fine:g} refined)"
        )
    if abs(fine - base) / base >= GATE_RTOL:
        raise ValueError(
            f"weight {u.label} fails the A_1 gate: characteristic moved from "
            f"{base:.6g} to {fine:.6g} under one 4x refinement"
        )
    return base, fine


def theorem_verify(
    T: OperatorSpec,
    u: Weight,
    family: FamilyLike,
    test_functions: list[StepFunction] | None = None,
    function_ids: list[str] | None = None,
    qs: tuple[float, ...] = DEFAULT_QS,
    seed: int = 1234,
) -> TheoremReport:
    """Audit the full bound for one operator and weight over a family.

    Order of business: (1) the A_1 gate on u, refusing weights whose
    characteristic is infinite or still moving under refinement; (2) a
    hypothesis test whose battery includes the products f u, since those
    are the functions the chain feeds to T; (3) the smallest exponent q
    with a finite hypothesis constant and a stable reverse Holder constant
    at delta = q - 1; (4) a full s0..s5 margin scan over every (f, I).

    The empirical constant is max s0 / (||f||_inf I(u)) over the battery,
    compared against the predicted 2 C_hyp C_rhi.
    """
    grid = u.grid
    check_all_aligned_budget(grid, family, "theorem_verify")
    a1_value, a1_refined = _a1_gate(u, family)

    if test_functions is None:
        ids, fs = default_test_functions(grid, seed)
    else:
        fs = test_functions
        ids = function_ids or [f"f{i}" for i in range(len(fs))]

    products = [StepFunction(grid, f.values * u.f.values) for f in fs]
    hyp_fs = fs + products
    hyp_ids = ids + [f"{fid}*u" for fid in ids]
    hyp = hypothesis_test(T, hyp_fs, family, qs=qs, function_ids=hyp_ids)

    q_used = None
    c_hyp = None
    rhi_rep = None
    reasons = []
    for q in sorted(qs):
        c = hyp.best_constant(q)
        if not math.isfinite(c):
            reasons.append(f"q={q:g}: hypothesis constant is infinite")
            continue
        rep = rhi_constant(u, q - 1.0, family)
        if not rep.stable:
            reasons.append(
                f"q={q:g}: reverse Holder constant unstable "
                f"({rep.constant:.6g} -> {rep.refined_constant:.6g} refined)"
            )
            continue
        q_used, c_hyp, rhi_rep = q, c, rep
        break

    label = family_label(family)
    if q_used is None:
        return TheoremReport(
            verdict="hypothesis-failed",
            q_used=None,
            c_hyp=None,
            c_rhi=None,
            predicted_bound=None,
            empirical_constant=math.nan,
            empirical_function=None,
            empirical_witness=None,
            a1_value=a1_value,
            a1_refined=a1_refined,
            n_triples=0,
            n_margin_failures=0,
            min_margins=None,
            worst_margin=math.nan,
            worst_margin_step=None,
            worst_margin_function=None,
            worst_margin_interval=None,
            hypothesis=hyp,
            rhi=None,
            operator=T.label(),
            weight=u.label,
            family=label,
            n_cells=grid.n_cells,
            diagnostics="; ".join(reasons),
        )

    assert c_hyp is not None and rhi_rep is not None
    c_rhi = rhi_rep.constant
    predicted = 2.0 * c_hyp * c_rhi

    scan = margin_scan(T, u, fs, ids, family, q_used, c_hyp, c_rhi)
    empirical = scan.empirical_constant
    within = empirical <= predicted * (1.0 + MARGIN_RTOL) + MARGIN_ATOL
    verdict = "holds" if (within and scan.n_failures == 0) else "violated"
    diag = ""
    if verdict == "violated":
        parts = []
        if not within:
            parts.append(
                f"empirical constant {empirical:.6g} exceeds predicted {predicted:.6g}"
            )
        if scan.n_failures:
            parts.append(f"{scan.n_failures} triples fail a chain margin")
        diag = "; ".join(parts)

    return TheoremReport(
        verdict=verdict,
        q_used=q_used,
        c_hyp=c_hyp,
        c_rhi=c_rhi,
        predicted_bound=predicted,
        empirical_constant=empirical,
        empirical_function=scan.empirical_function,
        empirical_witness=scan.empirical_witness,
        a1_value=a1_value,
        a1_refined=a1_refined,
        n_triples=scan.n_triples,
        n_margin_failures=scan.n_failures,
        min_margins=scan.min_margins,
        worst_margin=scan.worst_margin,
        worst_margin_step=scan.worst_margin_step,
        worst_margin_function=scan.worst_margin_function,
        worst_margin_interval=scan.worst_margin_interval,
        hypothesis=hyp,
        rhi=rhi_rep,
        operator=T.label(),
        weight=u.label,
        family=label,
        n_cells=grid.n_cells,
        diagnostics=diag,
    )


# -- convergence studies -------------------------------------------------------

STUDY_QUANTITIES = ("a1", "ap", "rhi", "bmo-u", "sharp-norm-ratio")


@dataclass(frozen=True)
class ConvergenceRow:
    n_cells: int
    value: float
    ratio: float  # value / previous value, nan on the first row
    witness: str


@dataclass(frozen=True)
class ConvergenceReport:
    quantity: str
    rows: tuple[ConvergenceRow, ...]
    divergent: bool
    growth_per_4x: float
    weight: str
    family: str
    params: str


def convergence_study(
    quantity: str,
    weight_spec: WeightSpec,
    family_factory: Callable[[int], FamilyLike],
    sizes: tuple[int, ...],
    a: float,
    b: float,
    p: float = 2.0,
    delta: float = 0.5,
    function_id: str = "sign",
    seed: int = 1234,
) -> ConvergenceReport:
    """One functional across grid sizes, with growth diagnostics.

    divergent means: every value finite, values strictly increasing, and
    the normalized growth rate per 4x refinement,

        (v_last / v_first) ^ (log 4 / log(n_last / n_first)),

    at least 1.5.  A quantity that merely drifts a few percent stays
    non-divergent; repeated equal sizes give ratio 1 rows and never
    trigger the flag.
    """
    if quantity not in STUDY_QUANTITIES:
        raise ValueError(
            f"unknown study quantity {quantity!r}; expected one of {STUDY_QUANTITIES}"
        )
    if len(sizes) < 1:
        raise ValueError("convergence_study needs at least one size")
    rows: list[ConvergenceRow] = []
    prev = math.nan
    for n in sizes:
        grid = make_grid(a, b, n)
        w = materialize_weight(weight_spec, grid)
        fam = family_factory(n)
        witness = ""
        if quantity == "a1":
            rep = a1_characteristic(w, fam)
            value = rep.value
            witness = rep.witness.describe(grid) if rep.witness else ""
        elif quantity == "ap":
            rep = ap_characteristic(w, p, fam)
            value = rep.value
            witness = rep.witness.describe(grid) if rep.witness else ""
        elif quantity == "rhi":
            rep = rhi_constant(w, delta, fam)
            value = rep.constant
            witness = rep.witness.describe(grid) if rep.witness else ""
        elif quantity == "bmo-u":
            f = make_test_function(function_id, grid, seed)
            rep = bmo_u_seminorm(f, w, fam, function_id)
            value = rep.value
            witness = rep.witness.describe(grid) if rep.witness else ""
        else:
            f = make_test_function(function_id, grid, seed)
            value = sharp_norm_ratio(f, p, fam)
        if rows and prev != 0.0 and math.isfinite(prev):
            ratio = value / prev
        else:
            ratio = math.nan
        rows.append(ConvergenceRow(n_cells=n, value=value, ratio=ratio, witness=witness))
        prev = value

    values = [r.value for r in rows]
    finite = all(math.isfinite(v) for v in values)
    increasing = all(values[i + 1] > values[i] * (1.0 + 1e-9) for i in range(len(values) - 1))
    growth = math.nan
    if finite and len(values) >= 2 and values[0] > 0 and sizes[-1] > sizes[0]:
        growth = (values[-1] / values[0]) ** (math.log(4.0) / math.log(sizes[-1] / sizes[0]))
    divergent = bool(finite and increasing and math.isfinite(growth) and growth >= DIVERGENT_GROWTH)

    params = f"p={p:g}, delta={delta:g}, f={function_id}"
    return ConvergenceReport(
        quantity=quantity,
        rows=tuple(rows),
        divergent=divergent,
        growth_per_4x=growth,
        weight=weight_spec.label(),
        family=family_label(family_factory(sizes[-1])),
        params=params,
    )
