"""Scenario-driven command line front end.

Every command reads one scenario file, computes, and writes a JSON
report plus flat CSV tables and a PNG figure into the output directory.
All numeric output is rounded to 12 significant digits and written
atomically, so identical scenario + seed gives byte-identical files.
Wall-clock timing goes to stderr only, never into the artifacts.

Exit codes: 0 success, 1 configuration or runtime error (the offending
scenario key is named and no partial output files are left behind),
2 a theorem verdict of violated or hypothesis-failed, or self-test
criteria failing.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time

import numpy as np

from .bmo import bmo_u_seminorm, sharp_maximal, sharp_norm_ratio
from .figures import bar_figure, field_figure, line_figure, save_figure
from .grid import GridInterval, family_label
from .harness import convergence_study, theorem_verify
from .operators import hypothesis_test
from .reporting import ARTIFACT_VERSION, fmt_num, write_csv, write_json
from .scenario import Scenario, ScenarioError, parse_scenario
from .weights import (
    a1_characteristic,
    ainf_margin,
    ap_characteristic,
    rhi_constant,
    rhi_max_delta,
)

__all__ = ["main"]

COMMANDS = (
    "characterize-weight",
    "rhi",
    "bmo",
    "sharp",
    "hypothesis",
    "theorem",
    "converge",
    "self-test",
)


class _Emitter:
    """Output-file writer that can retract everything on failure."""

    def __init__(self, out_dir: str) -> None:
        self.out_dir = out_dir
        self.written: list[str] = []

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def json(self, name: str, obj) -> None:
        p = self.path(name)
        write_json(p, obj)
        self.written.append(p)

    def csv(self, name: str, header, rows) -> None:
        p = self.path(name)
        write_csv(p, header, rows)
        self.written.append(p)

    def figure(self, name: str, fig) -> None:
        p = self.path(name)
        save_figure(fig, p)
        self.written.append(p)

    def cleanup(self) -> None:
        for p in self.written:
            try:
                os.remove(p)
            except OSError:
                pass
        self.written.clear()


def _envelope(command: str, sc: Scenario) -> dict:
    return {
        "artifact_version": ARTIFACT_VERSION,
        "command": command,
        "scenario": dict(sc.raw),
        "seed": sc.seed,
        "grid": {"a": sc.grid_a, "b": sc.grid_b, "n_cells": sc.n_cells},
    }


def _witness_cells(witness: GridInterval | None, grid) -> list:
    if witness is None:
        return ["", "", "", ""]
    return [witness.start, witness.end, witness.x_left(grid), witness.x_right(grid)]


WITNESS_COLS = ["witness_start", "witness_end", "witness_x_left", "witness_x_right"]


# -- command handlers ----------------------------------------------------------


def _cmd_characterize(sc: Scenario, em: _Emitter) -> int:
    grid = sc.grid()
    w = sc.weight(grid)
    fam = sc.family()
    a1 = a1_characteristic(w, fam)
    aps = [ap_characteristic(w, p, fam) for p in sorted(sc.ps)]
    full = GridInterval(0, grid.n_cells)
    ainfs = [ainf_margin(w, full, d, sc.epsilon) for d in sorted(sc.deltas)]

    report = _envelope("characterize-weight", sc)
    report["results"] = {"a1": a1, "ap": aps, "ainf": ainfs}
    rows = []
    rows.append(["a1", "", fmt_num(a1.value), *_witness_cells(a1.witness, grid), ""])
    for rep in aps:
        rows.append(
            ["ap", fmt_num(rep.p), fmt_num(rep.value), *_witness_cells(rep.witness, grid), rep.notes]
        )
    for rep in ainfs:
        rows.append(
            [
                "ainf",
                fmt_num(rep.delta),
                fmt_num(rep.worst_fraction),
                *_witness_cells(rep.interval, grid),
                "pass" if rep.passed else "fail",
            ]
        )
    fig = field_figure(
        grid.midpoints(),
        {w.label: w.f.values},
        "x",
        f"weight profile, n={grid.n_cells}",
    )
    em.json("report.json", report)
    em.csv("characteristics.csv", ["kind", "param", "value", *WITNESS_COLS, "note"], rows)
    em.figure("weight_profile.png", fig)
    return 0


def _cmd_rhi(sc: Scenario, em: _Emitter) -> int:
    grid = sc.grid()
    w = sc.weight(grid)
    fam = sc.family()
    sweep = [rhi_constant(w, d, fam) for d in sorted(sc.deltas)]
    max_delta = rhi_max_delta(w, fam, sc.c_max, delta_hi=sc.delta_hi)

    report = _envelope("rhi", sc)
    report["results"] = {"sweep": sweep, "max_delta": max_delta}
    rows = [
        [
            fmt_num(r.delta),
            fmt_num(r.constant),
            fmt_num(r.refined_constant),
            r.stable,
            r.closed_form,
            *_witness_cells(r.witness, grid),
        ]
        for r in sweep
    ]
    deltas = [r.delta for r in sweep]
    consts = [r.constant if r.stable else np.nan for r in sweep]
    fig = line_figure(
        deltas,
        {"constant (stable)": consts, "constant (raw)": [r.constant for r in sweep]},
        "delta",
        "reverse Holder constant",
        f"{w.label}, {family_label(fam)}, n={grid.n_cells}",
    )
    em.json("report.json", report)
    em.csv(
        "rhi.csv",
        ["delta", "constant", "refined_constant", "stable", "closed_form", *WITNESS_COLS],
        rows,
    )
    em.figure("rhi_curve.png", fig)
    return 0


def _cmd_bmo(sc: Scenario, em: _Emitter) -> int:
    grid = sc.grid()
    w = sc.weight(grid)
    fam = sc.family()
    ids, fs = sc.test_functions(grid)
    reports = [bmo_u_seminorm(f, w, fam, fid) for fid, f in zip(ids, fs)]

    report = _envelope("bmo", sc)
    report["results"] = {"seminorms": reports}
    rows = [
        [r.function, fmt_num(r.value), *_witness_cells(r.witness, grid)] for r in reports
    ]
    finite = [r.value if math.isfinite(r.value) else 0.0 for r in reports]
    fig = bar_figure(
        [r.function for r in reports],
        finite,
        "BMO_u seminorm",
        f"{w.label}, {family_label(fam)}, n={grid.n_cells}",
    )
    em.json("report.json", report)
    em.csv("bmo.csv", ["function", "seminorm", *WITNESS_COLS], rows)
    em.figure("bmo_bars.png", fig)
    return 0


def _cmd_sharp(sc: Scenario, em: _Emitter) -> int:
    grid = sc.grid()
    fam = sc.family()
    f = sc.test_function(sc.function, grid)
    field = sharp_maximal(f, fam, sc.function)
    ratios = {f"p={p:g}": fmt_num(sharp_norm_ratio(f, p, fam)) for p in sorted(sc.ps)}

    report = _envelope("sharp", sc)
    report["results"] = {
        "function": sc.function,
        "family": field.family,
        "field_max": float(np.max(field.f.values)),
        "field_min": float(np.min(field.f.values)),
        "norm_ratios": ratios,
    }
    mids = grid.midpoints()
    rows = [
        [i, fmt_num(mids[i]), fmt_num(f.values[i]), fmt_num(field.f.values[i])]
        for i in range(grid.n_cells)
    ]
    fig = field_figure(
        mids,
        {sc.function: f.values, "sharp": field.f.values},
        "x",
        f"sharp maximal field, {field.family}, n={grid.n_cells}",
    )
    em.json("report.json", report)
    em.csv("sharp.csv", ["cell", "x_mid", "f", "sharp"], rows)
    em.figure("sharp_field.png", fig)
    return 0


def _cmd_hypothesis(sc: Scenario, em: _Emitter) -> int:
    grid = sc.grid()
    fam = sc.family()
    T = sc.operator(grid)
    ids, fs = sc.test_functions(grid)
    rep = hypothesis_test(T, fs, fam, qs=tuple(sorted(sc.qs)), function_ids=ids)

    report = _envelope("hypothesis", sc)
    report["results"] = rep
    qrows = [
        [
            fmt_num(e.q),
            fmt_num(e.best_constant),
            fmt_num(e.median_ratio),
            e.n_pairs,
            e.n_skipped,
            e.n_infinite,
            e.witness_function or "",
            *_witness_cells(e.witness, grid),
        ]
        for e in rep.per_q
    ]
    wrows = [
        [fmt_num(r.q), r.function, fmt_num(r.ratio), r.kind, *_witness_cells(r.interval, grid)]
        for r in rep.worst
    ]
    qs = [e.q for e in rep.per_q]
    consts = [e.best_constant if math.isfinite(e.best_constant) else np.nan for e in rep.per_q]
    fig = line_figure(
        qs,
        {"best constant": consts},
        "q",
        "best local constant",
        f"{rep.operator}, {rep.family}, n={grid.n_cells}",
    )
    em.json("report.json", report)
    em.csv(
        "hypothesis.csv",
        ["q", "best_constant", "median_ratio", "n_pairs", "n_skipped", "n_infinite",
         "witness_function", *WITNESS_COLS],
        qrows,
    )
    em.csv("worst_ratios.csv", ["q", "function", "ratio", "kind", *WITNESS_COLS], wrows)
    em.figure("hypothesis_constants.png", fig)
    return 0


def _cmd_theorem(sc: Scenario, em: _Emitter) -> int:
    grid = sc.grid()
    w = sc.weight(grid)
    fam = sc.family()
    T = sc.operator(grid)
    ids, fs = sc.test_functions(grid)
    rep = theorem_verify(
        T, w, fam, test_functions=fs, function_ids=ids, qs=tuple(sorted(sc.qs)), seed=sc.seed
    )

    report = _envelope("theorem", sc)
    report["results"] = rep
    mrows = []
    if rep.min_margins is not None:
        names = ["osc_vs_2avg", "avg_vs_lq", "lq_vs_hypothesis", "hyp_vs_sup_uq", "uq_vs_rhi"]
        for i, name in enumerate(names):
            mrows.append([i, name, fmt_num(rep.min_margins[i])])
    fig_vals = list(rep.min_margins or ())
    fig = bar_figure(
        [f"m{i}" for i in range(len(fig_vals))] or ["none"],
        fig_vals or [0.0],
        "minimum margin",
        f"chain margins, verdict {rep.verdict}",
    )
    em.json("report.json", report)
    em.csv("margins.csv", ["index", "step", "min_margin"], mrows)
    em.figure("chain_margins.png", fig)
    return 0 if rep.verdict == "holds" else 2


def _cmd_converge(sc: Scenario, em: _Emitter) -> int:
    rep = convergence_study(
        sc.quantity,
        sc.weight_spec(),
        lambda n: sc.family(n),
        tuple(sc.sizes),
        sc.grid_a,
        sc.grid_b,
        p=sc.p,
        delta=sc.delta,
        function_id=sc.function,
        seed=sc.seed,
    )

    report = _envelope("converge", sc)
    report["results"] = rep
    rows = [
        [r.n_cells, fmt_num(r.value), fmt_num(r.ratio), r.witness] for r in rep.rows
    ]
    sizes = [r.n_cells for r in rep.rows]
    values = [r.value for r in rep.rows]
    fig = line_figure(
        sizes,
        {rep.quantity: values},
        "n_cells",
        rep.quantity,
        f"{rep.weight}, {rep.params}, divergent={rep.divergent}",
        logx=True,
        logy=all(v > 0 for v in values if math.isfinite(v)),
    )
    em.json("report.json", report)
    em.csv("convergence.csv", ["size", "value", "ratio", "witness"], rows)
    em.figure("convergence.png", fig)
    return 0


def _cmd_self_test(em: _Emitter) -> int:
    from .acceptance import run_suite

    results = run_suite()
    for r in results:
        line = f"criterion {r.number:02d} {'PASS' if r.passed else 'FAIL'} - {r.title}"
        print(line)
    report = {
        "artifact_version": ARTIFACT_VERSION,
        "command": "self-test",
        "criteria": results,
        "n_passed": sum(1 for r in results if r.passed),
        "n_total": len(results),
    }
    rows = [
        [r.number, r.title, r.passed, r.detail] for r in results
    ]
    em.json("selftest_report.json", report)
    em.csv("selftest.csv", ["number", "title", "passed", "detail"], rows)
    return 0 if all(r.passed for r in results) else 2


# -- entry point ---------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wbmo",
        description="weighted BMO laboratory: characteristics, operator bounds, audits",
    )
    parser.add_argument(
        "command",
        nargs="?",
        choices=COMMANDS,
        help="what to run (see the scenario format in the package docs)",
    )
    parser.add_argument("--scenario", help="path to a key = value scenario file")
    parser.add_argument("--out", help="output directory (overrides scenario out.dir)")
    parser.add_argument(
        "--threads",
        type=int,
        help="best-effort cap on BLAS/OpenMP threads for inner kernels",
    )
    parser.add_argument("--seed", type=int, help="override the scenario seed")
    parser.add_argument(
        "--self-test",
        action="store_true",
        help="run the built-in acceptance suite and report per criterion",
    )
    return parser


_HANDLERS = {
    "characterize-weight": _cmd_characterize,
    "rhi": _cmd_rhi,
    "bmo": _cmd_bmo,
    "sharp": _cmd_sharp,
    "hypothesis": _cmd_hypothesis,
    "theorem": _cmd_theorem,
    "converge": _cmd_converge,
}


def main(argv: list[str] | None = None) -> int:
    ns = _build_parser().parse_args(argv)
    if ns.threads is not None and ns.threads > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(ns.threads)

    command = ns.command
    if ns.self_test and command is None:
        command = "self-test"
    if command is None:
        print("error: no command given (try wbmo --help)", file=sys.stderr)
        return 1

    t0 = time.perf_counter()
    em = _Emitter(ns.out or ".")
    try:
        if command == "self-test":
            if ns.out is None:
                em.out_dir = "."
            code = _cmd_self_test(em)
        else:
            if ns.scenario is None:
                print(f"error: {command} needs --scenario <path>", file=sys.stderr)
                return 1
            sc = parse_scenario(ns.scenario)
            if ns.seed is not None:
                sc.seed = ns.seed
            em.out_dir = ns.out or sc.out_dir
            code = _HANDLERS[command](sc, em)
    except (ScenarioError, ValueError, OSError) as e:
        em.cleanup()
        print(f"error: {e}", file=sys.stderr)
        return 1
    elapsed = time.perf_counter() - t0
    print(f"wbmo {command}: done in {elapsed:.2f}s", file=sys.stderr)
    return code
