"""Grid construction, interval families, and exact step-function calculus."""

import math

import numpy as np
import pytest

from wbmo import (
    ALL_ALIGNED_LIMIT,
    Grid,
    GridInterval,
    IntervalFamilySpec,
    StepFunction,
    average,
    enumerate_family,
    ess_inf,
    family_label,
    integrate,
    lq_norm_local,
    make_grid,
    refine_family,
    sup_norm,
)
from wbmo.grid import check_all_aligned_budget, family_groups

rng = np.random.default_rng(20240817)


def sf(grid: Grid, values) -> StepFunction:
    return StepFunction(grid, np.asarray(values, dtype=float))


# ---------------------------------------------------------------------------
# grids


def test_make_grid_basic():
    g = make_grid(-1.0, 1.0, 8)
    assert g.h == pytest.approx(0.25, abs=0.0)
    assert g.edges()[0] == -1.0 and g.edges()[-1] == 1.0
    assert len(g.edges()) == 9
    assert g.midpoints()[0] == pytest.approx(-0.875)


def test_make_grid_unit_spacing():
    g = make_grid(0.0, 4.0, 4)
    assert g.h == 1.0


@pytest.mark.parametrize(
    "a,b,n",
    [
        (1.0, 1.0, 8),  # empty domain
        (1.0, 0.0, 8),  # reversed
        (0.0, 1.0, 3),  # not a power of two
        (0.0, 1.0, 1),  # too few cells
        (0.0, math.inf, 8),
        (math.nan, 1.0, 8),
    ],
)
def test_make_grid_rejects(a, b, n):
    with pytest.raises(ValueError):
        make_grid(a, b, n)


def test_grid_refinement():
    g = make_grid(-1.0, 1.0, 8)
    r = g.refined(4)
    assert r.n_cells == 32
    assert r.h == pytest.approx(g.h / 4)
    assert r.a == g.a and r.b == g.b


def test_interval_validation_and_geometry():
    g = make_grid(-1.0, 1.0, 8)
    iv = GridInterval(2, 6)
    assert iv.n_cells == 4
    assert iv.measure(g) == pytest.approx(1.0)
    assert iv.x_left(g) == pytest.approx(-0.5)
    assert iv.x_right(g) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        GridInterval(4, 4)
    with pytest.raises(ValueError):
        GridInterval(-1, 3)


# ---------------------------------------------------------------------------
# interval families


def test_family_counts_n8():
    g = make_grid(-1.0, 1.0, 8)
    assert len(enumerate_family(g, IntervalFamilySpec("all-aligned"))) == 36
    assert len(enumerate_family(g, IntervalFamilySpec("dyadic"))) == 15
    sliding = IntervalFamilySpec("sliding", windows=(3,), stride=1)
    assert len(enumerate_family(g, sliding)) == 6


def test_dyadic_count_formula():
    for n in (2, 16, 64):
        g = make_grid(0.0, 1.0, n)
        assert len(enumerate_family(g, IntervalFamilySpec("dyadic"))) == 2 * n - 1


def test_family_ordering_and_uniqueness():
    g = make_grid(0.0, 1.0, 16)
    fam = enumerate_family(g, IntervalFamilySpec("all-aligned"))
    keys = [(iv.start, iv.end) for iv in fam]
    assert keys == sorted(set(keys))


def test_union_of_specs_deduplicates():
    g = make_grid(0.0, 1.0, 8)
    union = [IntervalFamilySpec("all-aligned"), IntervalFamilySpec("dyadic")]
    groups = family_groups(g, union)
    total = sum(len(starts) for _, starts in groups)
    assert total == 36  # dyadic intervals are all aligned already


def test_sliding_window_too_large():
    g = make_grid(0.0, 1.0, 8)
    with pytest.raises(ValueError):
        enumerate_family(g, IntervalFamilySpec("sliding", windows=(9,), stride=1))


def test_sliding_stride():
    g = make_grid(0.0, 1.0, 16)
    fam = enumerate_family(g, IntervalFamilySpec("sliding", windows=(4,), stride=4))
    assert [(iv.start, iv.end) for iv in fam] == [(0, 4), (4, 8), (8, 12), (12, 16)]


def test_dyadic_min_cells():
    g = make_grid(0.0, 1.0, 16)
    fam = enumerate_family(g, IntervalFamilySpec("dyadic", min_cells=4))
    assert all(iv.n_cells >= 4 for iv in fam)
    assert len(fam) == 1 + 2 + 4


def test_refine_family_explicit_and_spec():
    explicit = [GridInterval(1, 3)]
    ref = refine_family(explicit, 2)
    assert [(iv.start, iv.end) for iv in ref] == [(2, 6)]
    spec = IntervalFamilySpec("sliding", windows=(2,), stride=2)
    ref_spec = refine_family(spec, 4)
    assert ref_spec.windows == (8,)
    assert ref_spec.stride == 2  # stride keeps its cell meaning: denser cover


def test_family_label_is_stable():
    assert "dyadic" in family_label(IntervalFamilySpec("dyadic"))
    assert family_label([GridInterval(0, 2)]) == "explicit(1 intervals)"


def test_all_aligned_budget_guard():
    g_ok = make_grid(0.0, 1.0, ALL_ALIGNED_LIMIT)
    check_all_aligned_budget(g_ok, IntervalFamilySpec("all-aligned"), "bmo_u")
    g_big = make_grid(0.0, 1.0, 2 * ALL_ALIGNED_LIMIT)
    with pytest.raises(ValueError):
        check_all_aligned_budget(g_big, IntervalFamilySpec("all-aligned"), "bmo_u")
    # dyadic families stay cheap at any size
    check_all_aligned_budget(g_big, IntervalFamilySpec("dyadic"), "bmo_u")


# ---------------------------------------------------------------------------
# step-function calculus


def test_integrate_examples():
    g = make_grid(-1.0, 1.0, 8)
    two = sf(g, np.full(8, 2.0))
    assert integrate(two, GridInterval(0, 8)) == pytest.approx(4.0, abs=1e-15)
    sign = sf(g, np.where(g.midpoints() < 0, -1.0, 1.0))
    assert integrate(sign, GridInterval(0, 8)) == pytest.approx(0.0, abs=1e-15)
    assert integrate(sign, GridInterval(4, 8)) == pytest.approx(1.0, abs=1e-15)


def test_average_asymmetric_window():
    # average of sign over [-0.25, 0.75]: one negative cell, three positive
    g = make_grid(-1.0, 1.0, 8)
    sign = sf(g, np.where(g.midpoints() < 0, -1.0, 1.0))
    assert average(sign, GridInterval(3, 7)) == pytest.approx(0.5, abs=1e-15)


def test_lq_norm_examples():
    g = make_grid(-1.0, 1.0, 8)
    sign = sf(g, np.where(g.midpoints() < 0, -1.0, 1.0))
    full = GridInterval(0, 8)
    assert lq_norm_local(sign, full, 2.0) == pytest.approx(math.sqrt(2.0), rel=1e-12)
    c = sf(g, np.full(8, 3.0))
    assert lq_norm_local(c, full, 4.0) == pytest.approx(3.0 * 2.0 ** 0.25, rel=1e-12)
    zero = sf(g, np.zeros(8))
    assert lq_norm_local(zero, full, 2.0) == 0.0
    with pytest.raises(ValueError):
        lq_norm_local(sign, full, 0.5)


def test_ess_inf_and_sup_norm():
    g = make_grid(-1.0, 1.0, 8)
    f = sf(g, [0.5, -3.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0])
    assert ess_inf(f, GridInterval(0, 3)) == -3.0
    assert sup_norm(f) == 3.0
    sign = sf(g, np.where(g.midpoints() < 0, -1.0, 1.0))
    assert ess_inf(sign, GridInterval(0, 8)) == -1.0


def test_additivity_of_integral():
    g = make_grid(-2.0, 2.0, 64)
    f = sf(g, rng.normal(size=64))
    for _ in range(50):
        s = int(rng.integers(0, 63))
        e = int(rng.integers(s + 2, 65))
        m = int(rng.integers(s + 1, e))
        left = integrate(f, GridInterval(s, m))
        right = integrate(f, GridInterval(m, e))
        whole = integrate(f, GridInterval(s, e))
        assert whole == pytest.approx(left + right, rel=1e-12, abs=1e-12)


def test_power_mean_monotone_in_q():
    g = make_grid(0.0, 1.0, 32)
    f = sf(g, rng.uniform(0.1, 3.0, size=32))
    iv = GridInterval(4, 20)
    measure = iv.measure(g)
    prev = -math.inf
    for q in (1.0, 1.5, 2.0, 4.0, 8.0):
        norm = lq_norm_local(f, iv, q) / measure ** (1.0 / q)
        assert norm >= prev - 1e-12
        prev = norm


def test_average_below_normalized_lq():
    g = make_grid(-1.0, 1.0, 64)
    for _ in range(20):
        f = sf(g, rng.normal(size=64))
        s = int(rng.integers(0, 63))
        e = int(rng.integers(s + 1, 65))
        iv = GridInterval(s, e)
        q = float(rng.uniform(1.0, 4.0))
        bound = lq_norm_local(f, iv, q) / iv.measure(g) ** (1.0 / q)
        fabs = sf(g, np.abs(f.values))
        assert average(fabs, iv) <= bound * (1 + 1e-12)


def test_ess_inf_avg_max_sandwich():
    g = make_grid(0.0, 2.0, 32)
    f = sf(g, rng.uniform(0.0, 5.0, size=32))
    iv = GridInterval(3, 29)
    lo = ess_inf(f, iv)
    mid = average(f, iv)
    hi = float(np.max(f.values[3:29]))
    assert lo <= mid + 1e-15
    assert mid <= hi + 1e-15


def test_range_queries_match_slices():
    g = make_grid(0.0, 1.0, 64)
    vals = rng.uniform(0.25, 4.0, size=64)
    f = sf(g, vals)
    starts = []
    ends = []
    for _ in range(60):
        s = int(rng.integers(0, 63))
        starts.append(s)
        ends.append(int(rng.integers(s + 1, 65)))
    starts = np.array(starts)
    ends = np.array(ends)
    sums = f.range_sum(starts, ends)
    mins = f.range_min(starts, ends)
    pows = f.range_pow_sum(starts, ends, 2.5)
    for i, (s, e) in enumerate(zip(starts, ends)):
        assert sums[i] == pytest.approx(float(np.sum(vals[s:e])), rel=1e-12)
        assert mins[i] == float(np.min(vals[s:e]))
        assert pows[i] == pytest.approx(float(np.sum(vals[s:e] ** 2.5)), rel=1e-12)


def test_step_function_length_mismatch():
    g = make_grid(0.0, 1.0, 8)
    with pytest.raises(ValueError):
        sf(g, np.ones(7))
