"""Acceptance criteria 1-11.  Each check prints one PASS/FAIL line."""
import functools
import itertools
import math
import time

import numpy as np
import pytest

from adaptsp.bounds import (bounds_report, compute_tree_stats, rounding_residual, select_t_db, table_rows,
                            value_gap_intervals)
from adaptsp.experiments import ExperimentPlan, ordering_violations, run_sweep
from adaptsp.formulations import (CapacityExpansionData, build_adaptive_fixed, build_adaptive_joint,
                                  build_multistage, build_twostage, condensed_model, default_x_upper,
                                  restrict_single_period, single_resource_value, x_values)
from adaptsp.heuristics import ats_relax, exact_ats
from adaptsp.instances import (random_capacity_instance, random_demand_tree, random_single_resource_tree,
                               stagewise_independent_tree)
from adaptsp.model import SolverConfig, Status, relax, solve
from adaptsp.newsvendor import example_configs, revision_curve
from adaptsp.tree import condense, node_count

EXACT = SolverConfig(gap=1e-9)


# -- 1, 2: single-resource illustrative tree ----------------------------------

def test_c1_value_gap_table(app_tree, record):
    t0 = time.perf_counter()
    rows = table_rows(app_tree)
    elapsed = time.perf_counter() - t0
    want = {
        "vT_minus_vR": (0.00, 1.50, 5.25, 2.63, 0.00),
        "vR_minus_vM": (6.94, 5.44, 1.69, 4.31, 6.94),
        "delta_plus": (41.00, 39.50, 35.75, 38.38, 41.00),
    }
    worst = max(abs(r[k] - w[i]) for k, w in want.items() for i, r in enumerate(rows))
    ok = worst <= 0.005 + 1e-9 and elapsed < 5.0
    record("criterion 1 (value-gap table)", ok, f"max abs err {worst:.4f}, {elapsed:.2f}s")
    assert ok


def test_c2_illustrative_anchors(app_tree, record):
    a_lo, a_hi, d_star, d_bar = compute_tree_stats(app_tree)
    v_t = single_resource_value(app_tree, "a", "delta", "two", config=EXACT)
    v_m = single_resource_value(app_tree, "a", "delta", "multi", config=EXACT)
    ok = d_star == 41 and d_bar == 34.0625 and abs(v_t - 41) <= 1e-6 and abs(v_m - 34.0625) <= 1e-6
    record("criterion 2 (illustrative anchors)", ok, f"delta*={d_star} delta_bar={d_bar} vT={v_t} vM={v_m}")
    assert ok


# -- 3: newsvendor ----------------------------------------------------------------

FIGURE1 = {
    "stationary": {"static": 305.12, "dynamic": 280.40, "adaptive4": 292.81},
    "growing_demand": {"static": 405.12, "dynamic": 380.27, "adaptive4": 392.64},
    "growing_costs": {"static": 442.15, "dynamic": 398.15, "adaptive4": 418.83},
}


@functools.lru_cache(maxsize=None)
def _newsvendor_curves():
    t0 = time.perf_counter()
    curves = {k: revision_curve(cfg) for k, cfg in example_configs(scenarios=1000, seed=0).items()}
    return curves, time.perf_counter() - t0


def test_c3_newsvendor_costs(record):
    curves, elapsed = _newsvendor_curves()
    worst = 0.0
    for name, target in FIGURE1.items():
        rows = curves[name]
        got = {"static": rows[0]["static"], "dynamic": rows[0]["dynamic"], "adaptive4": rows[3]["adaptive"]}
        worst = max(worst, *(abs(got[k] / target[k] - 1) for k in target))
    ok = worst <= 0.02 and elapsed < 30.0
    record("criterion 3a (newsvendor costs within 2%)", ok, f"max rel err {100 * worst:.2f}%, {elapsed:.1f}s")
    assert ok


def test_c3_newsvendor_argmin(record):
    curves, _ = _newsvendor_curves()
    argmins = {name: min(rows, key=lambda r: r["adaptive"])["t_star"] for name, rows in curves.items()}
    ok = all(v == 4 for v in argmins.values())
    record("criterion 3b (adaptive argmin is 4)", ok, f"argmins {argmins}")
    assert ok


# -- 4, 8: joint MILP oracle and ATS-Relax guarantee --------------------------------

def _oracle_instance(seed):
    T = 2 + seed % 3
    I = 1 + (seed // 3) % 2
    tree = random_demand_tree(2, T, 1000 + seed, items=I)
    return tree, random_capacity_instance(tree, I, 1000 + seed)


@functools.lru_cache(maxsize=None)
def _oracle_results():
    t0 = time.perf_counter()
    out = []
    for seed in range(25):
        tree, data = _oracle_instance(seed)
        T, I = tree.stage_count, data.n_resources
        brute = min(solve(build_adaptive_fixed(tree, data, list(rv)), EXACT).objective
                    for rv in itertools.product(range(1, T + 1), repeat=I))
        out.append((tree, data, exact_ats(tree, data, EXACT), brute))
    return out, time.perf_counter() - t0


def test_c4_joint_matches_brute_force(record):
    results, elapsed = _oracle_results()
    worst = max(abs(ats.objective - brute) for _, _, ats, brute in results)
    ok = worst <= 1e-6 and elapsed < 120.0
    record("criterion 4 (joint MILP = brute force)", ok, f"25 instances, max abs diff {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_c8_ats_relax_guarantee(record):
    results, _ = _oracle_results()
    bad = []
    for k, (tree, data, ats, _) in enumerate(results):
        r = ats_relax(tree, data, EXACT)
        a1 = data.acquisition_costs(tree)[:, 0].sum()
        if not (r.objective - ats.objective <= r.guarantee + 1e-6 and r.guarantee <= a1 + 1e-9):
            bad.append(k)
    record("criterion 8a (ATS-Relax gap <= residual bound <= sum a_i1)", not bad, f"violations {bad}")
    assert not bad


def _nested_family(seed):
    big = random_demand_tree(2, 6, seed, items=2)
    d6 = random_capacity_instance(big, 2, seed)
    for T in range(3, 7):
        t = big.truncate(T)
        n = t.n_nodes
        yield T, t, CapacityExpansionData(d6.a[:n], d6.b[:n], d6.A[:n], d6.B[:n], d6.d[:n])


def test_c8_nested_gap_per_stage(record):
    failing = []
    for seed in range(6):
        per_t = []
        for T, tree, data in _nested_family(seed):
            gap = ats_relax(tree, data, EXACT).objective - exact_ats(tree, data, EXACT).objective
            per_t.append(gap / T)
        if any(b > a + 1e-6 for a, b in zip(per_t, per_t[1:])):
            failing.append((seed, [round(v, 4) for v in per_t]))
    record("criterion 8b (nested family T=3..6: gap/T nonincreasing)", not failing, f"failing families {failing}")
    assert not failing


# -- 5: sandwich ------------------------------------------------------------------

def test_c5_sandwich(record):
    rng = np.random.default_rng(55)
    bad = []
    for seed in range(20):
        T = 3 + seed % 2
        tree = random_demand_tree(2, T, 500 + seed, items=2)
        data = random_capacity_instance(tree, 2, 500 + seed)
        v_ms = solve(build_multistage(tree, data), EXACT).objective
        v_ts = solve(build_twostage(tree, data), EXACT).objective
        for _ in range(5):
            rv = list(rng.integers(1, T + 1, size=2))
            v = solve(build_adaptive_fixed(tree, data, rv), EXACT).objective
            tol = 1e-6 * max(1.0, abs(v))
            if not (v_ms <= v + tol and v <= v_ts + tol):
                bad.append((seed, rv))
    record("criterion 5 (V^MS <= V^ATS(t*) <= V^TS)", not bad, f"100 checks, violations {bad}")
    assert not bad


# -- 6, 7: single-resource bounds and integrality ------------------------------------

def test_c6_interval_containment(record):
    bad = []
    for seed in range(20):
        tree = random_single_resource_tree(2, 3 + seed % 3, 600 + seed)
        for r in table_rows(tree, config=EXACT):
            rep = bounds_report(tree)
            sav, loss = value_gap_intervals(rep, r["t_star"])
            if r["vT_minus_vR"] not in sav or r["vR_minus_vM"] not in loss:
                bad.append((seed, r["t_star"]))
    record("criterion 6 (gaps inside analytical intervals)", not bad, f"20 instances, violations {bad}")
    assert not bad


def test_c7_condensed_lp_integral(record):
    rng = np.random.default_rng(77)
    worst = 0.0
    for seed in range(20):
        T = 3 + seed % 3
        tree = random_single_resource_tree(2 + seed % 2, T, 700 + seed, integer=True)
        ct = condense(tree, int(rng.integers(1, T + 1)))
        assert np.all(ct.delta_hat == np.round(ct.delta_hat))
        sol = solve(relax(condensed_model(ct)), EXACT)
        assert sol.status == Status.OPTIMAL
        worst = max(worst, float(np.abs(sol.x - np.round(sol.x)).max()))
    ok = worst <= 1e-6
    record("criterion 7 (condensed LP vertices integral)", ok, f"max fractionality {worst:.1e}")
    assert ok


# -- 9, 10 ----------------------------------------------------------------------------

def test_c9_single_period_equivalence(record):
    worst = 0.0
    for seed in range(10):
        tree = random_demand_tree(2, 3 + seed % 2, 900 + seed, items=2)
        data = random_capacity_instance(tree, 2, 900 + seed)
        xu = default_x_upper(tree, data, EXACT)
        joint = restrict_single_period(build_adaptive_joint(tree, data, xu), tree, xu)
        ms = restrict_single_period(build_multistage(tree, data), tree, xu)
        sj, sm = solve(joint, EXACT), solve(ms, EXACT)
        assert sj.status == sm.status == Status.OPTIMAL
        periods = [len({int(tree.stages[n]) for n in np.flatnonzero(row > 1e-6)}) for row in x_values(joint, sj.x)]
        assert max(periods) <= 1
        worst = max(worst, abs(sj.objective - sm.objective))
    ok = worst <= 1e-6
    record("criterion 9 (single-period joint ATS = MS)", ok, f"max abs diff {worst:.2e}")
    assert ok


def test_c10_demand_based_selector(record):
    bad = []
    for seed in range(10):
        tree = stagewise_independent_tree(2 + seed % 2, 4 + seed % 3, 1100 + seed)
        delta = tree.values("delta")
        first = int(tree.stages[np.flatnonzero(delta == delta.max())].min())
        if select_t_db(tree) != first:
            bad.append((seed, select_t_db(tree), first))
    record("criterion 10 (t_DB = first stage holding peak demand)", not bad, f"mismatches {bad}")
    assert not bad


# -- 11: protocol shape -----------------------------------------------------------------

def test_c11_node_count_endpoints(record):
    ok = node_count(2, 3) == 7 and node_count(3, 10) == 29524
    record("criterion 11a (node counts 7 and 29524)", ok, f"{node_count(2, 3)}, {node_count(3, 10)}")
    assert ok


@pytest.fixture(scope="module")
def desk_sweep(tmp_path_factory):
    plan = ExperimentPlan()  # M=2, T=3..6, 3 replications
    out = tmp_path_factory.mktemp("desk")
    return plan, out, run_sweep(plan, out)


def test_c11_desk_sweep(desk_sweep, record):
    plan, out, res = desk_sweep
    tol = 100.0 * plan.gap
    errors = [c for c in res["cells"] if c["error"]]
    negative = [(c["M"], c["T"], c["gamma"], c["rep"], c["rvats"]) for c in res["cells"]
                if c.get("rvats") is None or c["rvats"] < -tol]
    order = ordering_violations(res["methods"], tol)
    files = all((out / f).exists() for f in ("rvats.csv", "methods.csv", "manifest.json", "rvats.png"))
    n_cells = len(plan.cells())
    ok = not errors and not negative and not order and files and len(res["cells"]) == n_cells
    record("criterion 11b (desk sweep: RVATS >= 0, gain ordering)", ok,
           f"{n_cells} cells, errors {len(errors)}, negative {negative}, ordering {order}")
    assert ok
