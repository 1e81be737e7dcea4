"""Built-in acceptance suite: twelve desk-scale checks, one per contract.

Each criterion recomputes everything it needs from scratch and reports a
pass flag plus a short deterministic detail string (no wall-clock values
ever land in the detail, so repeated runs render identical bytes; runtime
budgets are reported as booleans).  The suite is what `wbmo self-test`
runs and what tests/test_acceptance.py asserts criterion by criterion.

Criterion 11 carries its own exhaustive reimplementation of every
interval functional: direct Python loops over explicit interval lists,
no prefix sums, no range tables, so a bug in the fast path cannot hide
in a shared helper.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .bmo import bmo_u_seminorm, sharp_maximal
from .grid import (
    GridInterval,
    IntervalFamilySpec,
    StepFunction,
    make_grid,
)
from .harness import (
    _a1_gate,
    convergence_study,
    default_test_functions,
    make_test_function,
    margin_scan,
    theorem_verify,
)
from .operators import OperatorSpec, hypothesis_test
from .reporting import render_csv, render_json
from .weights import (
    WeightSpec,
    a1_characteristic,
    ap_characteristic,
    materialize_weight,
    rhi_constant,
    transform_weight,
)

__all__ = ["CriterionResult", "run_suite"]


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str


def _close(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol


def _relerr(value: float, target: float) -> float:
    return abs(value - target) / abs(target)


# -- exhaustive slow path for criterion 11 ------------------------------------


def _all_intervals(n: int) -> list[tuple[int, int]]:
    return [(s, e) for s in range(n) for e in range(s + 1, n + 1)]


def _b_avg(vals: list[float], s: int, e: int) -> float:
    return sum(vals[s:e]) / (e - s)


def _b_a1(wvals: list[float], n: int) -> float:
    best = -math.inf
    for s, e in _all_intervals(n):
        m = min(wvals[s:e])
        a = _b_avg(wvals, s, e)
        if m == 0.0:
            r = math.inf if a > 0.0 else 1.0
        else:
            r = a / m
        best = max(best, r)
    return best


def _b_ap(wvals: list[float], dualvals: list[float], n: int, p: float) -> float:
    if any(v == 0.0 for v in wvals):
        return math.inf
    best = -math.inf
    for s, e in _all_intervals(n):
        best = max(best, _b_avg(wvals, s, e) * _b_avg(dualvals, s, e) ** (p - 1.0))
    return best


def _b_rhi(wvals: list[float], tvals: list[float], n: int, delta: float) -> float:
    best = -math.inf
    for s, e in _all_intervals(n):
        a = _b_avg(wvals, s, e)
        t = _b_avg(tvals, s, e) ** (1.0 / (1.0 + delta))
        best = max(best, t / a if a > 0.0 else (math.inf if t > 0.0 else 1.0))
    return best


def _b_osc(fvals: list[float], s: int, e: int) -> float:
    m = _b_avg(fvals, s, e)
    return sum(abs(v - m) for v in fvals[s:e]) / (e - s)


def _b_bmo(fvals: list[float], wvals: list[float], n: int) -> float:
    best = 0.0
    for s, e in _all_intervals(n):
        o = _b_osc(fvals, s, e)
        a = _b_avg(wvals, s, e)
        if a == 0.0:
            if o > 0.0:
                return math.inf
            continue
        best = max(best, o / a)
    return best


def _b_sharp(fvals: list[float], n: int) -> list[float]:
    out = [0.0] * n
    for s, e in _all_intervals(n):
        o = _b_osc(fvals, s, e)
        for c in range(s, e):
            out[c] = max(out[c], o)
    return out


# -- criteria ------------------------------------------------------------------


def _c1() -> CriterionResult:
    grid = make_grid(-1.0, 1.0, 1024)
    w = materialize_weight(WeightSpec("constant"), grid)
    fam = IntervalFamilySpec("all-aligned")
    t0 = time.perf_counter()
    a1 = a1_characteristic(w, fam).value
    ap = ap_characteristic(w, 2.0, fam).value
    in_budget = (time.perf_counter() - t0) < 1.0
    ok = _close(a1, 1.0, 1e-12) and _close(ap, 1.0, 1e-12) and in_budget
    detail = (
        f"a1={a1:.15g}, ap(2)={ap:.15g} on all-aligned n=1024; "
        f"runtime under 1 s: {in_budget}"
    )
    return CriterionResult(1, "constant weight exactness", ok, detail)


def _c2_family(n: int) -> list[IntervalFamilySpec]:
    return [
        IntervalFamilySpec("dyadic"),
        IntervalFamilySpec("sliding", windows=(n // 64, n // 16, n // 4), stride=1),
    ]


def _c2() -> CriterionResult:
    target = 1.0 + math.sqrt(2.0)

    def value(n: int) -> float:
        grid = make_grid(-1.0, 1.0, n)
        w = materialize_weight(WeightSpec("power", alpha=-0.5), grid)
        return a1_characteristic(w, _c2_family(n)).value

    v4, v1 = value(4096), value(1024)
    e4, e1 = _relerr(v4, target), _relerr(v1, target)
    ok = e4 <= 0.01 and e4 < e1
    detail = (
        f"a1(|x|^-1/2)={v4:.10g} at n=4096 (rel err {e4:.3g}), "
        f"{v1:.10g} at n=1024 (rel err {e1:.3g}); target 1+sqrt(2)"
    )
    return CriterionResult(2, "singular A_1 constant", ok, detail)


def _c3() -> CriterionResult:
    rep = convergence_study(
        "a1",
        WeightSpec("power", alpha=0.5),
        lambda n: IntervalFamilySpec("dyadic"),
        (256, 1024),
        -1.0,
        1.0,
    )
    ratio = rep.rows[1].value / rep.rows[0].value
    ok = abs(ratio - 2.0) <= 0.2 and rep.divergent
    detail = (
        f"a1(|x|^+1/2) grew {rep.rows[0].value:.10g} -> {rep.rows[1].value:.10g} "
        f"(factor {ratio:.6g}) from n=256 to n=1024; divergent={rep.divergent}"
    )
    return CriterionResult(3, "non-A_1 detection", ok, detail)


def _c4() -> CriterionResult:
    grid = make_grid(-1.0, 1.0, 1024)
    fam = IntervalFamilySpec("dyadic")
    specs = [
        WeightSpec("constant"),
        WeightSpec("power", alpha=0.5),
        WeightSpec("power", alpha=-0.5),
        WeightSpec("truncated-power", alpha=-0.5, floor=2.0),
    ]
    ok = True
    parts = []
    for spec in specs:
        w = materialize_weight(spec, grid)
        a1 = a1_characteristic(w, fam).value
        v3 = ap_characteristic(w, 3.0, fam).value
        v2 = ap_characteristic(w, 2.0, fam).value
        v15 = ap_characteristic(w, 1.5, fam).value
        chain = v3 <= v2 + 1e-9 and v2 <= v15 + 1e-9 and v15 <= a1 + 1e-9
        ok = ok and chain
        parts.append(
            f"{spec.label()}: {v3:.6g} <= {v2:.6g} <= {v15:.6g} <= {a1:.6g} ({chain})"
        )
    return CriterionResult(4, "A_p class monotonicity", ok, "; ".join(parts))


def _prefix_family(n: int) -> list[GridInterval]:
    return [GridInterval(0, e) for e in range(1, n + 1)]


def _c5() -> CriterionResult:
    target = 2.0 ** (1.0 / 3.0)

    def rhi_at(n: int, delta: float):
        grid = make_grid(0.0, 1.0, n)
        w = materialize_weight(WeightSpec("power", alpha=-0.5), grid)
        return rhi_constant(w, delta, _prefix_family(n))

    stable_rep = rhi_at(4096, 0.5)
    e = _relerr(stable_rep.constant, target)
    part_a = e <= 0.01 and stable_rep.stable

    lo = rhi_at(1024, 1.2)
    hi = rhi_at(4096, 1.2)
    growth = hi.constant / lo.constant
    part_b = growth >= 1.5 and not hi.stable
    ok = part_a and part_b
    detail = (
        f"delta=0.5: constant {stable_rep.constant:.10g} (target 2^(1/3), rel err "
        f"{e:.3g}, stable={stable_rep.stable}); delta=1.2: {lo.constant:.10g} -> "
        f"{hi.constant:.10g}, growth x{growth:.6g} (needs >= x1.5), "
        f"stable={hi.stable}"
    )
    return CriterionResult(5, "reverse Holder constant and blowup", ok, detail)


def _c6() -> CriterionResult:
    grid = make_grid(-1.0, 1.0, 1024)
    fam = IntervalFamilySpec("all-aligned")
    sign = make_test_function("sign", grid)
    one = materialize_weight(WeightSpec("constant"), grid)
    singular = materialize_weight(WeightSpec("power", alpha=-0.5), grid)
    plain = bmo_u_seminorm(sign, one, fam, "sign")
    weighted = bmo_u_seminorm(sign, singular, fam, "sign")
    full = GridInterval(0, grid.n_cells)
    ok = (
        _close(plain.value, 1.0, 1e-9)
        and _close(weighted.value, 0.5, 1e-6)
        and weighted.witness == full
    )
    detail = (
        f"||sign||_BMO = {plain.value:.12g} (target 1); with u=|x|^-1/2: "
        f"{weighted.value:.12g} (target 0.5), witness {weighted.witness}"
    )
    return CriterionResult(6, "BMO seminorm closed forms", ok, detail)


def _c7() -> CriterionResult:
    grid = make_grid(-1.0, 1.0, 1024)
    fam = IntervalFamilySpec("all-aligned")
    sharp_sign = sharp_maximal(make_test_function("sign", grid), fam, "sign").f.values
    sharp_ind = sharp_maximal(make_test_function("indicator", grid), fam, "indicator").f.values
    dev_sign = float(np.max(np.abs(sharp_sign - 1.0)))
    dev_ind = float(np.max(np.abs(sharp_ind - 0.5)) / 0.5)
    ok = dev_sign <= 0.01 and dev_ind <= 0.01
    detail = (
        f"sharp(sign) within {dev_sign:.3g} of 1 at every cell; "
        f"sharp(indicator) within {dev_ind:.3g} relative of 0.5"
    )
    return CriterionResult(7, "sharp maximal fields", ok, detail)


def _c8() -> CriterionResult:
    grid = make_grid(-1.0, 1.0, 512)
    fam = IntervalFamilySpec("dyadic")
    ids, fs = default_test_functions(grid)
    ident = hypothesis_test(OperatorSpec("identity"), fs, fam, function_ids=ids)
    exact = all(e.best_constant == 1.0 for e in ident.per_q)
    hilb = hypothesis_test(OperatorSpec("truncated-hilbert"), fs, fam, function_ids=ids)
    n_inf = sum(e.n_infinite for e in hilb.per_q)
    n_out = sum(1 for r in hilb.violations if r.kind in ("infinite", "outlier"))
    witnessed = n_inf > 0 or n_out > 0
    ok = exact and witnessed
    detail = (
        f"identity best constants all exactly 1: {exact}; truncated-hilbert "
        f"recorded {n_inf} infinite ratios and {n_out} violation rows at n=512"
    )
    return CriterionResult(8, "hypothesis tester", ok, detail)


def _c9() -> CriterionResult:
    t0 = time.perf_counter()
    grid = make_grid(-1.0, 1.0, 1024)
    fam = IntervalFamilySpec("dyadic")
    sign = make_test_function("sign", grid)
    ops = [
        OperatorSpec("identity"),
        OperatorSpec("multiplier", multiplier=sign, multiplier_id="sign"),
        OperatorSpec("dyadic-expectation", level=3),
        OperatorSpec("moving-average", halfwidth=0.25),
        OperatorSpec("hl-maximal"),
    ]
    specs = [
        WeightSpec("constant"),
        WeightSpec("power", alpha=-0.5),
        WeightSpec("truncated-power", alpha=-0.5, floor=2.0),
    ]
    ids, fs = default_test_functions(grid)
    total = 0
    failures = 0
    mins = [math.inf] * 5
    scans = 0
    for spec in specs:
        w = materialize_weight(spec, grid)
        _a1_gate(w, fam)
        products = [StepFunction(grid, f.values * w.f.values) for f in fs]
        hyp_ids = ids + [f"{fid}*u" for fid in ids]
        for T in ops:
            hyp = hypothesis_test(T, fs + products, fam, function_ids=hyp_ids)
            for entry in hyp.per_q:
                if not math.isfinite(entry.best_constant):
                    continue
                c_rhi = rhi_constant(w, entry.q - 1.0, fam).constant
                scan = margin_scan(
                    T, w, fs, ids, fam, entry.q, entry.best_constant, c_rhi
                )
                total += scan.n_triples
                failures += scan.n_failures
                mins = [min(a, b) for a, b in zip(mins, scan.min_margins)]
                scans += 1
    in_budget = (time.perf_counter() - t0) < 60.0
    ok = total >= 10_000 and failures == 0 and in_budget
    min_text = ", ".join(f"{m:.3g}" for m in mins)
    detail = (
        f"{total} (f, I, q) triples over {scans} scans, {failures} margin "
        f"failures; per-step minimum margins [{min_text}]; runtime under "
        f"60 s: {in_budget}"
    )
    return CriterionResult(9, "chain audit soundness", ok, detail)


def _c10() -> CriterionResult:
    grid = make_grid(-1.0, 1.0, 512)
    fam = IntervalFamilySpec("dyadic")
    sign = make_test_function("sign", grid)
    one = materialize_weight(WeightSpec("constant"), grid)
    singular = materialize_weight(WeightSpec("power", alpha=-0.5), grid)

    r1 = theorem_verify(OperatorSpec("identity"), one, fam)
    r2 = theorem_verify(
        OperatorSpec("multiplier", multiplier=sign, multiplier_id="sign"), singular, fam
    )
    r3 = theorem_verify(OperatorSpec("truncated-hilbert"), one, fam)

    def bounded(r) -> bool:
        return (
            r.verdict == "holds"
            and r.predicted_bound is not None
            and r.empirical_constant <= r.predicted_bound + 1e-9
        )

    ok = bounded(r1) and bounded(r2) and r3.verdict == "hypothesis-failed"
    detail = (
        f"identity/u=1: {r1.verdict}, empirical {r1.empirical_constant:.10g} vs "
        f"predicted {r1.predicted_bound:.10g}; multiplier-sign/|x|^-1/2: "
        f"{r2.verdict}, {r2.empirical_constant:.10g} vs {r2.predicted_bound:.10g}; "
        f"truncated-hilbert: {r3.verdict}"
    )
    return CriterionResult(10, "theorem end to end", ok, detail)


def _c11() -> CriterionResult:
    n = 16
    grid = make_grid(-1.0, 1.0, n)
    fam = IntervalFamilySpec("all-aligned")
    rng = np.random.default_rng([1234, 99])
    weights = [
        materialize_weight(WeightSpec("constant"), grid),
        materialize_weight(WeightSpec("power", alpha=-0.5), grid),
        materialize_weight(
            WeightSpec("custom", values=tuple(rng.uniform(0.2, 2.0, n))), grid
        ),
    ]
    fns = {fid: make_test_function(fid, grid) for fid in ("sign", "indicator", "random-1")}

    worst = 0.0

    def check(fast: float, brute: float) -> None:
        nonlocal worst
        if math.isinf(fast) and math.isinf(brute):
            return
        dev = abs(fast - brute) / max(1.0, abs(brute))
        worst = max(worst, dev)

    for w in weights:
        wl = [float(v) for v in w.f.values]
        check(a1_characteristic(w, fam).value, _b_a1(wl, n))
        for p in (2.0, 1.5):
            dual, _ = transform_weight(w, -1.0 / (p - 1.0))
            dl = [float(v) for v in dual.f.values]
            check(ap_characteristic(w, p, fam).value, _b_ap(wl, dl, n, p))
        t, _ = transform_weight(w, 1.5)
        tl = [float(v) for v in t.f.values]
        check(rhi_constant(w, 0.5, fam).constant, _b_rhi(wl, tl, n, 0.5))
        for fid, f in fns.items():
            fl = [float(v) for v in f.values]
            check(bmo_u_seminorm(f, w, fam, fid).value, _b_bmo(fl, wl, n))

    for fid, f in fns.items():
        fl = [float(v) for v in f.values]
        fast_field = sharp_maximal(f, fam, fid).f.values
        brute_field = _b_sharp(fl, n)
        for c in range(n):
            check(float(fast_field[c]), brute_field[c])

    ok = worst <= 1e-12
    detail = (
        f"fast vs direct-loop values agree to {worst:.3g} (tolerance 1e-12) over "
        f"3 weights x (a1, ap(2), ap(1.5), rhi(0.5), bmo_u x3) and 3 sharp fields"
    )
    return CriterionResult(11, "brute force equivalence", ok, detail)


def _determinism_bundle() -> bytes:
    grid = make_grid(-1.0, 1.0, 128)
    w = materialize_weight(WeightSpec("power", alpha=-0.5), grid)
    fam = IntervalFamilySpec("dyadic")
    sign = make_test_function("sign", grid)
    th = theorem_verify(
        OperatorSpec("multiplier", multiplier=sign, multiplier_id="sign"), w, fam
    )
    conv = convergence_study(
        "a1",
        WeightSpec("power", alpha=0.5),
        lambda n: IntervalFamilySpec("dyadic"),
        (64, 128),
        -1.0,
        1.0,
    )
    payload = {
        "a1": a1_characteristic(w, fam),
        "rhi": rhi_constant(w, 0.5, fam),
        "theorem": th,
        "converge": conv,
    }
    blob = render_json(payload).encode("utf-8")
    rows = [[e.q, e.best_constant, e.n_pairs] for e in th.hypothesis.per_q]
    blob += render_csv(["q", "best_constant", "n_pairs"], rows).encode("utf-8")
    return blob


def _c12() -> CriterionResult:
    first = _determinism_bundle()
    second = _determinism_bundle()
    ok = first == second
    detail = (
        f"two independent recomputations rendered {len(first)} bytes; "
        f"identical: {ok}"
    )
    return CriterionResult(12, "deterministic reports", ok, detail)


_CRITERIA = (_c1, _c2, _c3, _c4, _c5, _c6, _c7, _c8, _c9, _c10, _c11, _c12)

_CACHE: tuple[CriterionResult, ...] | None = None


def run_suite() -> tuple[CriterionResult, ...]:
    """All twelve criteria, computed once per process and cached."""
    global _CACHE
    if _CACHE is None:
        _CACHE = tuple(fn() for fn in _CRITERIA)
    return _CACHE
