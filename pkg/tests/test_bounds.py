import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaptsp.bounds import (bounds_report, capex_gap_bounds, compute_revision_stats, compute_tree_stats,
                            rounding_residual, select_t_cb, select_t_db, table_rows, value_gap_intervals)
from adaptsp.errors import InvalidRange
from adaptsp.instances import random_capacity_instance, random_demand_tree, random_single_resource_tree
from adaptsp.formulations import build_adaptive_fixed, build_multistage, build_twostage
from adaptsp.model import SolverConfig, solve

EXACT = SolverConfig(gap=1e-9)


def test_tree_stats(app_tree):
    assert compute_tree_stats(app_tree) == (1.0, 1.0, 41.0, 34.0625)


def test_delta_plus_row(app_tree):
    rep = bounds_report(app_tree)
    assert np.allclose(rep.delta_plus(), [41, 39.5, 35.75, 38.375, 41])
    assert compute_revision_stats(app_tree, t=3).delta_minus == 29


def test_stats_range(app_tree):
    with pytest.raises(InvalidRange):
        compute_revision_stats(app_tree, t=6)


def test_unit_costs_collapse_intervals(app_tree):
    for r in table_rows(app_tree):
        assert math.isclose(r["saving_lo"], r["saving_hi"]) and math.isclose(r["saving_lo"], r["vT_minus_vR"], abs_tol=1e-9)


def test_selectors(app_tree):
    assert select_t_db(app_tree) == 3
    t = app_tree.with_payloads(a=np.where(app_tree.stages <= 2, 1.0, 3.0))
    assert select_t_cb(t) == 2


def test_rounding_residual():
    t = random_single_resource_tree(2, 3, 0, integer=True)
    assert rounding_residual(t, t.values("delta"), 2) == 0
    frac = t.values("delta") + 0.25
    assert math.isclose(rounding_residual(t, frac, 2), 0.75)


def test_capex_bounds_bracket_integer_values():
    for seed in range(3):
        tree = random_demand_tree(2, 3, 11 + seed, items=2)
        data = random_capacity_instance(tree, 2, 11 + seed)
        v_t = solve(build_twostage(tree, data), EXACT).objective
        v_m = solve(build_multistage(tree, data), EXACT).objective
        for rv in ([2, 3], [3, 2], [1, 3]):
            v_r = solve(build_adaptive_fixed(tree, data, rv), EXACT).objective
            assert capex_gap_bounds(tree, data, rv, "vs_two_stage") <= v_t - v_r + 1e-6
            assert capex_gap_bounds(tree, data, rv, "vs_multi_stage") >= v_r - v_m - 1e-6


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), M=st.integers(2, 3), T=st.integers(2, 4))
def test_intervals_contain_lp_gaps(seed, M, T):
    tree = random_single_resource_tree(M, T, seed)
    rep = bounds_report(tree)
    for r in table_rows(tree, config=EXACT):
        sav, loss = value_gap_intervals(rep, r["t_star"])
        assert sav.lo <= sav.hi + 1e-9 and loss.lo <= loss.hi + 1e-9
        assert r["vT_minus_vR"] in sav
        assert r["vR_minus_vM"] in loss
