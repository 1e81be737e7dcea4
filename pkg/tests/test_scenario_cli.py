"""Scenario parsing and the command-line surface.

CLI tests run the installed package in a subprocess and treat the output
files as frozen contracts: field names asserted here are load-bearing for
downstream tooling and must not drift.
"""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from wbmo import ScenarioError, parse_scenario
from wbmo.cli import _Emitter
from wbmo.scenario import resolve_window, scenario_from_dict


def write_scenario(tmp_path: Path, text: str) -> Path:
    p = tmp_path / "scenario.txt"
    p.write_text(text, encoding="utf-8")
    return p


def run_cli(args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "wbmo", *args],
        cwd=cwd,
        capture_output=True,
        text=True,
        timeout=300,
    )


# ---------------------------------------------------------------------------
# parsing


def test_defaults():
    sc = scenario_from_dict({})
    assert sc.grid_a == -1.0 and sc.grid_b == 1.0 and sc.n_cells == 1024
    assert sc.weight_kind == "constant"
    assert sc.operator_kind == "identity"
    assert sc.family_kind == "dyadic"
    assert sc.seed == 1234


def test_parse_full_file(tmp_path):
    p = write_scenario(
        tmp_path,
        """
        # a comment
        grid.a = -2
        grid.b = 2
        grid.n_cells = 128

        weight.kind = power
        weight.alpha = -0.25
        operator.kind = multiplier
        operator.multiplier = sign
        family.kind = dyadic+sliding
        family.windows = n/16, 8
        family.stride = 2
        qs = 1.05, 1.5
        seed = 42
        out.dir = results
        """,
    )
    sc = parse_scenario(str(p))
    assert sc.grid_a == -2.0 and sc.n_cells == 128
    assert sc.weight_alpha == -0.25
    assert sc.operator_kind == "multiplier"
    assert sc.family_kind == "dyadic+sliding"
    assert sc.family_windows == ("n/16", "8")
    assert sc.qs == (1.05, 1.5)
    assert sc.seed == 42
    assert sc.out_dir == "results"
    assert sc.raw["grid.a"] == "-2"
    g = sc.grid()
    assert g.n_cells == 128
    w = sc.weight(g)
    assert w.grid == g


def test_duplicate_key_rejected(tmp_path):
    p = write_scenario(tmp_path, "seed = 1\nseed = 2\n")
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(str(p))
    assert "seed" in str(exc.value)


def test_missing_equals_names_line(tmp_path):
    p = write_scenario(tmp_path, "grid.a = -1\nnot a pair\n")
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(str(p))
    assert "line 2" in str(exc.value)


def test_unknown_key_rejected():
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict({"grid.cells": "64"})
    assert "grid.cells" in str(exc.value)


@pytest.mark.parametrize(
    "pairs,key",
    [
        ({"grid.n_cells": "100"}, "grid.n_cells"),  # not a power of two
        ({"grid.n_cells": "1"}, "grid.n_cells"),
        ({"grid.a": "nan"}, "grid.a"),
        ({"grid.b": "-2"}, "grid.b"),  # must exceed the default a = -1
        ({"weight.kind": "gaussian"}, "weight.kind"),
        ({"weight.kind": "power", "weight.alpha": "-1.5"}, "weight.alpha"),
        ({"weight.c": "0"}, "weight.c"),
        ({"weight.kind": "custom"}, "weight.values"),
        ({"operator.kind": "hilbertt"}, "operator.kind"),
        ({"operator.level": "-2"}, "operator.level"),
        ({"operator.halfwidth": "0"}, "operator.halfwidth"),
        ({"family.kind": "random"}, "family.kind"),
        ({"family.windows": "n/0"}, "family.windows"),
        ({"family.windows": "half"}, "family.windows"),
        ({"family.stride": "0"}, "family.stride"),
        ({"family.min_cells": "3"}, "family.min_cells"),
        ({"functions": "sign,bump"}, "functions"),
        ({"qs": "1.0,1.5"}, "qs"),
        ({"qs": ""}, "qs"),
        ({"p": "1"}, "p"),
        ({"ps": "1,2"}, "ps"),
        ({"delta": "0"}, "delta"),
        ({"deltas": "0.5,-1"}, "deltas"),
        ({"epsilon": "0"}, "epsilon"),
        ({"epsilon": "1"}, "epsilon"),
        ({"c_max": "1"}, "c_max"),
        ({"delta_hi": "0"}, "delta_hi"),
        ({"quantity": "entropy"}, "quantity"),
        ({"sizes": "100,200"}, "sizes"),
        ({"seed": "1.5"}, "seed"),
    ],
)
def test_invalid_values_name_the_key(pairs, key):
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict(pairs)
    assert key in str(exc.value)


def test_custom_weight_and_function():
    sc = scenario_from_dict(
        {
            "grid.n_cells": "4",
            "weight.kind": "custom",
            "weight.values": "1, 2, 3, 4",
            "functions": "custom",
            "functions.custom": "1, -1, 1, -1",
        }
    )
    g = sc.grid()
    w = sc.weight(g)
    assert list(w.f.values) == [1.0, 2.0, 3.0, 4.0]
    ids, fs = sc.test_functions(g)
    assert ids == ["custom"]
    assert list(fs[0].values) == [1.0, -1.0, 1.0, -1.0]


def test_custom_function_requires_values():
    sc = scenario_from_dict({"grid.n_cells": "4", "functions": "custom"})
    with pytest.raises(ScenarioError) as exc:
        sc.test_functions(sc.grid())
    assert "functions.custom" in str(exc.value)


def test_resolve_window_tokens():
    assert resolve_window("n", 64) == 64
    assert resolve_window("n/4", 64) == 16
    assert resolve_window("8", 64) == 8
    # oversized divisors clamp to a single cell instead of erroring
    assert resolve_window("n/128", 64) == 1


def test_sliding_windows_resolve_per_grid_size():
    sc = scenario_from_dict(
        {"family.kind": "sliding", "family.windows": "n/4", "grid.n_cells": "64"}
    )
    fam = sc.family(64)
    assert fam.windows == (16,)
    fam_big = sc.family(256)
    assert fam_big.windows == (64,)


# ---------------------------------------------------------------------------
# emitter cleanup


def test_emitter_cleanup_removes_written_files(tmp_path):
    em = _Emitter(str(tmp_path))
    em.json("a.json", {"x": 1})
    em.csv("b.csv", ["col"], [[1]])
    assert (tmp_path / "a.json").exists()
    em.cleanup()
    assert not (tmp_path / "a.json").exists()
    assert not (tmp_path / "b.csv").exists()


# ---------------------------------------------------------------------------
# CLI end to end


CHARACTERIZE = """
grid.a = -1
grid.b = 1
grid.n_cells = 64
weight.kind = power
weight.alpha = -0.5
family.kind = dyadic
ps = 1.5, 2
deltas = 0.25
epsilon = 0.5
delta = 0.5
"""


def test_cli_characterize_outputs(tmp_path):
    p = write_scenario(tmp_path, CHARACTERIZE)
    out = tmp_path / "out"
    r = run_cli(["characterize-weight", "--scenario", str(p), "--out", str(out)], tmp_path)
    assert r.returncode == 0, r.stderr
    report = json.loads((out / "report.json").read_text())
    assert report["command"] == "characterize-weight"
    assert "artifact_version" in report
    assert report["scenario"]["weight.kind"] == "power"
    lines = (out / "characteristics.csv").read_text().splitlines()
    assert lines[0] == "kind,param,value,witness_start,witness_end,witness_x_left,witness_x_right,note"
    assert (out / "weight_profile.png").stat().st_size > 0
    # timing is stderr-only: nothing in any artifact
    assert "done in" in r.stderr
    assert "done in" not in (out / "report.json").read_text()


def test_cli_runs_are_byte_identical(tmp_path):
    p = write_scenario(tmp_path, CHARACTERIZE)
    outs = []
    for name in ("one", "two"):
        out = tmp_path / name
        r = run_cli(
            ["characterize-weight", "--scenario", str(p), "--out", str(out)], tmp_path
        )
        assert r.returncode == 0, r.stderr
        outs.append(out)
    for fname in ("report.json", "characteristics.csv", "weight_profile.png"):
        a = (outs[0] / fname).read_bytes()
        b = (outs[1] / fname).read_bytes()
        assert a == b, f"{fname} differs between identical runs"


BMO_RANDOM = """
grid.n_cells = 64
weight.kind = constant
family.kind = all-aligned
functions = random-1
"""


def test_cli_seed_changes_random_battery(tmp_path):
    p = write_scenario(tmp_path, BMO_RANDOM)
    outputs = {}
    for seed in ("1", "1", "2"):
        out = tmp_path / f"s{seed}_{len(outputs)}"
        r = run_cli(
            ["bmo", "--scenario", str(p), "--out", str(out), "--seed", seed], tmp_path
        )
        assert r.returncode == 0, r.stderr
        outputs[out] = (out / "bmo.csv").read_bytes()
    vals = list(outputs.values())
    assert vals[0] == vals[1]
    assert vals[0] != vals[2]


def test_cli_theorem_exit_codes(tmp_path):
    holds = write_scenario(
        tmp_path, "grid.n_cells = 64\nweight.kind = constant\nfamily.kind = dyadic\n"
    )
    out = tmp_path / "holds"
    r = run_cli(["theorem", "--scenario", str(holds), "--out", str(out)], tmp_path)
    assert r.returncode == 0, r.stderr
    report = json.loads((out / "report.json").read_text())
    assert report["results"]["verdict"] == "holds"

    failing = tmp_path / "failing.txt"
    failing.write_text(
        "grid.n_cells = 64\nweight.kind = constant\noperator.kind = truncated-hilbert\n"
        "family.kind = dyadic\n",
        encoding="utf-8",
    )
    out2 = tmp_path / "failed"
    r2 = run_cli(["theorem", "--scenario", str(failing), "--out", str(out2)], tmp_path)
    assert r2.returncode == 2
    report2 = json.loads((out2 / "report.json").read_text())
    assert report2["results"]["verdict"] == "hypothesis-failed"
    assert (out2 / "margins.csv").exists()


def test_cli_parse_error_leaves_no_files(tmp_path):
    p = write_scenario(tmp_path, "operator.kind = hilbertt\n")
    out = tmp_path / "out"
    r = run_cli(["hypothesis", "--scenario", str(p), "--out", str(out)], tmp_path)
    assert r.returncode == 1
    assert "operator.kind" in r.stderr
    assert not out.exists() or list(out.iterdir()) == []


def test_cli_bad_grid_size(tmp_path):
    p = write_scenario(tmp_path, "grid.n_cells = 100\n")
    r = run_cli(["rhi", "--scenario", str(p), "--out", str(tmp_path / "o")], tmp_path)
    assert r.returncode == 1
    assert "grid.n_cells" in r.stderr


def test_cli_requires_scenario(tmp_path):
    r = run_cli(["theorem"], tmp_path)
    assert r.returncode == 1
    assert "--scenario" in r.stderr


def test_cli_rejects_unknown_command(tmp_path):
    r = run_cli(["fourier"], tmp_path)
    assert r.returncode == 2  # argparse usage error


def test_cli_converge_golden_header(tmp_path):
    p = write_scenario(
        tmp_path,
        "quantity = a1\nweight.kind = power\nweight.alpha = -0.5\n"
        "family.kind = dyadic\nsizes = 64, 256\n",
    )
    out = tmp_path / "out"
    r = run_cli(["converge", "--scenario", str(p), "--out", str(out)], tmp_path)
    assert r.returncode == 0, r.stderr
    lines = (out / "convergence.csv").read_text().splitlines()
    assert lines[0] == "size,value,ratio,witness"
    assert len(lines) == 3
    assert (out / "convergence.png").stat().st_size > 0


def test_cli_self_test_reports_every_criterion(tmp_path):
    out = tmp_path / "st"
    r = run_cli(["self-test", "--out", str(out)], tmp_path)
    # criterion 5 exercises a genuine non-convergence and is expected red,
    # so the suite exits nonzero by design
    assert r.returncode == 2, r.stdout + r.stderr
    lines = [l for l in r.stdout.splitlines() if l.startswith("criterion ")]
    assert len(lines) == 12
    assert sum(1 for l in lines if " PASS " in l) == 11
    assert sum(1 for l in lines if " FAIL " in l) == 1
    assert any(l.startswith("criterion 05 FAIL") for l in lines)
    report = json.loads((out / "selftest_report.json").read_text())
    assert len(report["criteria"]) == 12
    assert report["n_passed"] == 11
    assert (out / "selftest.csv").exists()
