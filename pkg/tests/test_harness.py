"""The inequality-chain audit, the full verification loop, and the
convergence studies."""

import math

import numpy as np
import pytest

from wbmo import (
    GridInterval,
    IntervalFamilySpec,
    OperatorSpec,
    StepFunction,
    WeightSpec,
    apply_operator,
    chain_audit,
    convergence_study,
    enumerate_family,
    make_grid,
    make_test_function,
    margin_scan,
    materialize_weight,
    oscillation,
    sup_norm,
    theorem_verify,
)

rng = np.random.default_rng(20240821)

DYADIC = IntervalFamilySpec("dyadic")


def sf(grid, values):
    return StepFunction(grid, np.asarray(values, dtype=float))


def unit_weight(grid):
    return materialize_weight(WeightSpec("constant", c=1.0), grid)


def c2_family(n):
    return [
        IntervalFamilySpec("dyadic"),
        IntervalFamilySpec("sliding", windows=(n // 64, n // 16, n // 4), stride=1),
    ]


# ---------------------------------------------------------------------------
# test battery


def test_make_test_function_sign_and_const():
    g = make_grid(-1.0, 1.0, 64)
    s = make_test_function("sign", g)
    assert np.array_equal(np.unique(s.values), [-1.0, 1.0])
    assert np.all(make_test_function("const-1", g).values == 1.0)


def test_make_test_function_indicator_overlap():
    g = make_grid(-1.0, 1.0, 8)
    ind = make_test_function("indicator", g)
    assert np.array_equal(ind.values, [0, 0, 0, 0, 1, 1, 1, 1])
    g_coarse = make_grid(-2.0, 2.0, 4)  # cell [0, 1] covers half of [-0, 2]
    ind2 = make_test_function("indicator", g_coarse)
    assert np.array_equal(ind2.values, [0, 0, 1, 0])


def test_make_test_function_random_reproducible():
    g = make_grid(-1.0, 1.0, 32)
    a = make_test_function("random-2", g, seed=77)
    b = make_test_function("random-2", g, seed=77)
    c = make_test_function("random-2", g, seed=78)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert np.all(np.abs(a.values) <= 1.0)


def test_make_test_function_unknown_id():
    g = make_grid(-1.0, 1.0, 8)
    with pytest.raises(ValueError):
        make_test_function("bump", g)


# ---------------------------------------------------------------------------
# chain audit on single triples


def test_chain_identity_sign_full_interval():
    g = make_grid(-1.0, 1.0, 64)
    rep = chain_audit(
        OperatorSpec("identity"),
        unit_weight(g),
        make_test_function("sign", g),
        GridInterval(0, 64),
        q=1.05,
        c_hyp=1.0,
        c_rhi=1.0,
    )
    assert rep.passed
    assert rep.s[0] == pytest.approx(1.0, abs=1e-12)
    for k in range(1, 6):
        assert rep.s[k] == pytest.approx(2.0, abs=1e-12)


def test_chain_zero_function():
    g = make_grid(-1.0, 1.0, 32)
    rep = chain_audit(
        OperatorSpec("identity"),
        unit_weight(g),
        sf(g, np.zeros(32)),
        GridInterval(4, 28),
        q=1.5,
        c_hyp=1.0,
        c_rhi=1.0,
    )
    assert rep.passed
    assert all(v == 0.0 for v in rep.s)


def test_chain_with_harness_chosen_constants():
    g = make_grid(-1.0, 1.0, 256)
    u = materialize_weight(WeightSpec("power", alpha=-0.5), g)
    m = make_test_function("sign", g)
    T = OperatorSpec("multiplier", multiplier=m, multiplier_id="sign")
    verdict = theorem_verify(T, u, DYADIC)
    assert verdict.verdict == "holds"
    rep = chain_audit(
        T,
        u,
        make_test_function("const-1", g),
        GridInterval(128, 256),  # the cells of [0, 1]
        q=verdict.q_used,
        c_hyp=verdict.c_hyp,
        c_rhi=verdict.c_rhi,
    )
    assert rep.passed
    assert rep.s[5] >= rep.s[0]


def test_chain_rejects_bad_q_and_grids():
    g = make_grid(-1.0, 1.0, 16)
    f = make_test_function("sign", g)
    with pytest.raises(ValueError):
        chain_audit(
            OperatorSpec("identity"), unit_weight(g), f, GridInterval(0, 16),
            q=1.0, c_hyp=1.0, c_rhi=1.0,
        )
    g2 = make_grid(-1.0, 1.0, 32)
    with pytest.raises(ValueError):
        chain_audit(
            OperatorSpec("identity"), unit_weight(g2), f, GridInterval(0, 16),
            q=1.5, c_hyp=1.0, c_rhi=1.0,
        )


@pytest.mark.parametrize(
    "make_T",
    [
        lambda g: OperatorSpec("identity"),
        lambda g: OperatorSpec("moving-average", halfwidth=0.3),
        lambda g: OperatorSpec("truncated-hilbert"),
        lambda g: OperatorSpec("hl-maximal"),
    ],
)
def test_unconditional_steps_hold_for_any_operator(make_T):
    # s0 <= s1 <= s2 uses no hypothesis at all, and s3 <= s4 only needs
    # |f u| <= sup|f| u cellwise; both must survive arbitrary inputs
    g = make_grid(-1.0, 1.0, 64)
    T = make_T(g)
    for trial in range(8):
        u = materialize_weight(
            WeightSpec("custom", values=tuple(rng.uniform(0.05, 2.0, size=64))), g
        )
        f = sf(g, rng.normal(size=64))
        s = int(rng.integers(0, 63))
        e = int(rng.integers(s + 1, 65))
        q = float(rng.uniform(1.01, 3.0))
        rep = chain_audit(T, u, f, GridInterval(s, e), q=q, c_hyp=1.0, c_rhi=1.0)
        scale0 = max(abs(rep.s[0]), abs(rep.s[1]))
        scale1 = max(abs(rep.s[1]), abs(rep.s[2]))
        scale3 = max(abs(rep.s[3]), abs(rep.s[4]))
        assert rep.s[0] <= rep.s[1] + 1e-9 * scale0 + 1e-12
        assert rep.s[1] <= rep.s[2] + 1e-9 * scale1 + 1e-12
        assert rep.s[3] <= rep.s[4] + 1e-9 * scale3 + 1e-12


def test_margin_scan_agrees_with_chain_audit():
    g = make_grid(-1.0, 1.0, 32)
    u = materialize_weight(WeightSpec("power", alpha=0.5), g)
    fs = [make_test_function("sign", g), make_test_function("random-1", g)]
    ids = ["sign", "random-1"]
    scan = margin_scan(
        OperatorSpec("moving-average", halfwidth=0.25), u, fs, ids, DYADIC,
        q=1.5, c_hyp=2.0, c_rhi=1.3,
    )
    assert scan.n_triples == len(enumerate_family(g, DYADIC)) * len(fs)
    mins = [math.inf] * 5
    for fid, f in zip(ids, fs):
        for iv in enumerate_family(g, DYADIC):
            rep = chain_audit(
                OperatorSpec("moving-average", halfwidth=0.25), u, f, iv,
                q=1.5, c_hyp=2.0, c_rhi=1.3,
            )
            for k in range(5):
                mins[k] = min(mins[k], rep.s[k + 1] - rep.s[k])
    for k in range(5):
        assert scan.min_margins[k] == pytest.approx(mins[k], rel=1e-9, abs=1e-12)


# ---------------------------------------------------------------------------
# theorem verification


def test_theorem_identity_holds():
    g = make_grid(-1.0, 1.0, 256)
    rep = theorem_verify(OperatorSpec("identity"), unit_weight(g), DYADIC)
    assert rep.verdict == "holds"
    assert rep.n_margin_failures == 0
    assert rep.empirical_constant <= rep.predicted_bound + 1e-9
    assert rep.q_used == min(q for q in (1.01, 1.05, 1.1, 1.25, 1.5))


def test_theorem_multiplier_against_power_weight():
    g = make_grid(-1.0, 1.0, 256)
    u = materialize_weight(WeightSpec("power", alpha=-0.5), g)
    m = make_test_function("sign", g)
    T = OperatorSpec("multiplier", multiplier=m, multiplier_id="sign")
    rep = theorem_verify(T, u, DYADIC)
    assert rep.verdict == "holds"
    assert rep.empirical_constant <= rep.predicted_bound + 1e-9
    assert rep.hypothesis is not None
    # the battery must audit the products too: they carry the weight's
    # singularity into the operator, doubling the pair count per exponent
    n_intervals = len(enumerate_family(g, DYADIC))
    for entry in rep.hypothesis.per_q:
        assert entry.n_pairs == 12 * n_intervals


def test_theorem_hilbert_fails_hypothesis():
    g = make_grid(-1.0, 1.0, 128)
    rep = theorem_verify(OperatorSpec("truncated-hilbert"), unit_weight(g), DYADIC)
    assert rep.verdict == "hypothesis-failed"
    assert rep.q_used is None
    assert rep.predicted_bound is None
    assert "infinite" in rep.diagnostics


def test_theorem_moving_average_fails_hypothesis():
    # the window reaches outside any interval, so it smears mass onto
    # intervals where the indicator test function vanishes: the uniform
    # local bound genuinely does not hold for a non-local averaging
    g = make_grid(-1.0, 1.0, 128)
    rep = theorem_verify(
        OperatorSpec("moving-average", halfwidth=0.5), unit_weight(g), DYADIC
    )
    assert rep.verdict == "hypothesis-failed"


def test_theorem_empirical_constant_brute_force():
    g = make_grid(-1.0, 1.0, 128)
    u = materialize_weight(WeightSpec("power", alpha=-0.5), g)
    T = OperatorSpec("dyadic-expectation", level=2)
    rep = theorem_verify(T, u, DYADIC)
    assert rep.verdict == "holds"
    best = -math.inf
    from wbmo.harness import default_test_functions

    ids, fs = default_test_functions(g)
    for f in fs:
        fu = sf(g, f.values * u.f.values)
        tfu = apply_operator(T, fu)
        supf = sup_norm(f)
        if supf == 0:
            continue
        for iv in enumerate_family(g, DYADIC):
            avg_u = float(np.mean(u.f.values[iv.start : iv.end]))
            if avg_u <= 0:
                continue
            best = max(best, oscillation(tfu, iv) / (supf * avg_u))
    assert rep.empirical_constant == pytest.approx(best, rel=1e-9)


def test_theorem_gate_rejects_non_a1_weight():
    g = make_grid(-1.0, 1.0, 256)
    u = materialize_weight(WeightSpec("power", alpha=0.5), g)
    with pytest.raises(ValueError):
        theorem_verify(OperatorSpec("identity"), u, DYADIC)


def test_theorem_gate_rejects_vanishing_weight():
    g = make_grid(0.0, 1.0, 8)
    u = materialize_weight(
        WeightSpec("custom", values=(1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)), g
    )
    with pytest.raises(ValueError):
        theorem_verify(OperatorSpec("identity"), u, DYADIC)


# ---------------------------------------------------------------------------
# convergence studies


def test_convergence_a1_toward_closed_form():
    rep = convergence_study(
        "a1",
        WeightSpec("power", alpha=-0.5),
        c2_family,
        (256, 1024, 4096),
        -1.0,
        1.0,
    )
    values = [row.value for row in rep.rows]
    assert values == sorted(values)
    assert values[-1] == pytest.approx(1.0 + math.sqrt(2.0), rel=1e-2)
    assert not rep.divergent
    assert rep.rows[0].witness != ""
    assert math.isnan(rep.rows[0].ratio)
    assert rep.rows[1].ratio == pytest.approx(values[1] / values[0], rel=1e-12)


def test_convergence_flags_divergent_a1():
    rep = convergence_study(
        "a1",
        WeightSpec("power", alpha=0.5),
        lambda n: c2_family(n) if n >= 256 else DYADIC,
        (256, 1024),
        -1.0,
        1.0,
    )
    assert rep.divergent
    assert rep.rows[1].ratio == pytest.approx(2.0, rel=0.1)
    assert rep.growth_per_4x == pytest.approx(2.0, rel=0.1)


def test_convergence_repeated_size_is_flat():
    rep = convergence_study(
        "a1",
        WeightSpec("power", alpha=-0.5),
        lambda n: DYADIC,
        (256, 256),
        -1.0,
        1.0,
    )
    assert rep.rows[0].value == rep.rows[1].value
    assert rep.rows[1].ratio == 1.0
    assert not rep.divergent


def test_convergence_bmo_quantity():
    rep = convergence_study(
        "bmo-u",
        WeightSpec("constant", c=1.0),
        lambda n: IntervalFamilySpec("all-aligned"),
        (64, 128),
        -1.0,
        1.0,
        function_id="sign",
    )
    for row in rep.rows:
        assert row.value == pytest.approx(1.0, abs=1e-9)
    assert not rep.divergent


def test_convergence_rhi_quantity():
    rep = convergence_study(
        "rhi",
        WeightSpec("constant", c=2.0),
        lambda n: DYADIC,
        (64, 256),
        -1.0,
        1.0,
        delta=0.5,
    )
    for row in rep.rows:
        assert row.value == pytest.approx(1.0, abs=1e-12)


def test_convergence_validation():
    with pytest.raises(ValueError):
        convergence_study(
            "entropy", WeightSpec("constant"), lambda n: DYADIC, (64,), -1.0, 1.0
        )
    with pytest.raises(ValueError):
        convergence_study(
            "a1", WeightSpec("constant"), lambda n: DYADIC, (), -1.0, 1.0
        )
