import json
import math
from dataclasses import replace

import numpy as np
import pytest

from adaptsp import experiments
from adaptsp.errors import InvalidPlan
from adaptsp.experiments import (ExperimentPlan, extract_expansion_plan, ordering_violations, run_cell, run_sweep,
                                 trend_checks)
from adaptsp.formulations import build_genexp, load_genexp_data
from adaptsp.model import SolverConfig, solve
from adaptsp.tree import TreeGenConfig, generate_tree

SMALL = dict(stages=[3], gammas=[0.0, 0.01], replications=2, time_limit=30.0)


def test_plan_validation():
    ExperimentPlan().validate()
    for bad in ({"stages": [2]}, {"stages": [11]}, {"replications": 0}, {"gammas": [-0.1]}, {"methods": ["XYZ"]}):
        with pytest.raises(InvalidPlan):
            ExperimentPlan.from_dict(bad)
    with pytest.raises(InvalidPlan):
        ExperimentPlan.from_dict({"colour": 1})
    full = ExperimentPlan.full()
    assert full.branches == (2, 3) and full.stages == tuple(range(3, 11)) and full.replications == 5


def test_plan_round_trip(tmp_path):
    p = ExperimentPlan(**SMALL)
    (tmp_path / "p.json").write_text(json.dumps(p.to_dict()))
    assert ExperimentPlan.load(tmp_path / "p.json") == p


def test_seed_shared_across_gamma():
    p = ExperimentPlan()
    data = load_genexp_data()
    a = experiments.cell_tree(p, data, 2, 3, 0.0, 0)
    b = experiments.cell_tree(p, data, 2, 3, 0.0, 1)
    assert p.tree_seed(2, 3, 0) != p.tree_seed(2, 3, 1)
    assert not np.array_equal(a.values("demand[0]"), b.values("demand[0]"))


@pytest.fixture(scope="module")
def small_sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    plan = ExperimentPlan(**SMALL, table_gamma=0.01)
    return plan, out, run_sweep(plan, out)


def test_sweep_outputs(small_sweep):
    plan, out, res = small_sweep
    for f in ("rvats.csv", "rvats_runs.csv", "methods.csv", "methods_runs.csv", "runtimes.csv", "trends.csv",
              "manifest.json", "rvats.png", "methods.png"):
        assert (out / f).exists(), f
    assert len(list((out / "plans").glob("*.json"))) == plan.replications
    man = json.loads((out / "manifest.json").read_text())
    assert {"plan", "cells", "solver", "versions"} <= set(man)
    assert all(c["error"] is None for c in man["cells"])
    assert all(r["rvats"] >= -100 * plan.gap for r in res["rvats"])
    assert not ordering_violations(res["methods"], 100 * plan.gap)


def test_sweep_deterministic(small_sweep, tmp_path):
    plan, out, _ = small_sweep
    run_sweep(plan, tmp_path, figures=False)
    for f in ("rvats.csv", "methods.csv", "rvats_runs.csv"):
        assert (out / f).read_text() == (tmp_path / f).read_text()


def test_trend_rows(small_sweep):
    rows = trend_checks(small_sweep[2]["cells"])
    assert len(rows) == 2 and all("holds" in r for r in rows)


def test_timeout_substitutes_ts_relax(monkeypatch):
    real = experiments.exact_ats

    def slow(*a, **k):
        return replace(real(*a, **k), status="TimeLimit")

    monkeypatch.setattr(experiments, "exact_ats", slow)
    cell = run_cell(ExperimentPlan(**SMALL), 2, 3, 0.0, 0, full=False)
    tsr = experiments.ts_relax(experiments.cell_tree(ExperimentPlan(**SMALL), load_genexp_data(), 2, 3, 0.0, 0),
                               load_genexp_data(), ExperimentPlan(**SMALL).solver())
    assert cell["rvats_lower_bound"] is True
    assert math.isclose(cell["V_ATS"], tsr.objective)


def test_expansion_plan_breakdown():
    g = load_genexp_data()
    tree = generate_tree(TreeGenConfig.with_gamma(2, 3, 0.005, root_demand=tuple(g.root_demand), rng_seed=4))
    sol = solve(build_genexp(tree, g, "joint"), SolverConfig(gap=1e-6))
    plan = extract_expansion_plan(sol, tree, g)
    assert math.isclose(sum(plan.breakdown.values()), plan.objective, rel_tol=1e-9)
    assert len(plan.revisions) == len(g.types)
    assert all(a["units"] >= 0 for a in plan.acquisitions)
    ts = solve(build_genexp(tree, g, "ts"), SolverConfig(gap=1e-6))
    entries = extract_expansion_plan(ts, tree, g).acquisitions
    for name in g.types:
        assert [a["stage"] for a in entries if a["resource"] == name] == [1, 2, 3]


def test_zero_demand_gives_empty_plan():
    g = load_genexp_data()
    tree = generate_tree(TreeGenConfig(2, 3, (0.0,) * len(g.root_demand), rng_seed=1))
    sol = solve(build_genexp(tree, g, "joint"), SolverConfig(gap=1e-6))
    plan = extract_expansion_plan(sol, tree, g)
    assert plan.acquisitions == []
