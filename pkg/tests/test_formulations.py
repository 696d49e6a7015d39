import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaptsp.errors import InvalidData, InvalidRevision
from adaptsp.formulations import (CapacityExpansionData, RevisionVector, build_adaptive_fixed, build_adaptive_joint,
                                  build_genexp, build_multistage, build_single_resource, build_twostage,
                                  load_genexp_data, load_problem_data, requirements, single_resource_data,
                                  single_resource_value, x_values)
from adaptsp.instances import random_capacity_instance, random_demand_tree
from adaptsp.model import SolverConfig, Status, solve
from adaptsp.tree import TreeGenConfig, generate_tree

EXACT = SolverConfig(gap=1e-9)


@pytest.mark.parametrize("mode,t,want", [
    ("multi", None, 34.0625), ("two", None, 41.0), ("adaptive", 1, 41.0), ("adaptive", 2, 39.5),
    ("adaptive", 3, 35.75), ("adaptive", 4, 38.375), ("adaptive", 5, 41.0), ("joint", None, 35.75),
])
def test_illustrative_values(app_tree, mode, t, want):
    assert math.isclose(single_resource_value(app_tree, "a", "delta", mode, t, integer=True), want)


def test_wrapped_single_resource_matches(app_tree):
    data = single_resource_data(app_tree)
    assert math.isclose(solve(build_multistage(app_tree, data), EXACT).objective, 34.0625)
    assert math.isclose(solve(build_adaptive_fixed(app_tree, data, [3]), EXACT).objective, 35.75)
    sol = solve(build_adaptive_joint(app_tree, data), EXACT)
    assert math.isclose(sol.objective, 35.75)


def test_revision_vector_parse_and_validate():
    rv = RevisionVector.parse("2, 3,5")
    assert list(rv) == [2, 3, 5]
    with pytest.raises(InvalidRevision):
        rv.validate(4, 3)
    with pytest.raises(InvalidRevision):
        rv.validate(5, 2)


def test_negative_cost_rejected(app_tree):
    t = app_tree.with_payloads(a=-np.ones(app_tree.n_nodes))
    with pytest.raises(InvalidData):
        build_single_resource(t, mode="multi")


def test_capacity_json_round_trip(tmp_path):
    tree = random_demand_tree(2, 3, 1, items=2)
    data = random_capacity_instance(tree, 2, 1)
    d = {"kind": "capacity", **data.to_dict()}
    (tmp_path / "d.json").write_text(json.dumps(d))
    back = load_problem_data(tmp_path / "d.json", tree)
    assert np.allclose(back.A, data.A) and np.allclose(back.d, data.d)


def test_two_stage_shares_stage_decisions():
    tree = random_demand_tree(2, 3, 4, items=1)
    data = random_capacity_instance(tree, 1, 4)
    m = build_twostage(tree, data)
    x = x_values(m, solve(m, EXACT).x)
    for t in range(1, 4):
        assert np.ptp(x[0, tree.nodes_at(t)]) == 0


def test_fixed_revision_structure():
    tree = random_demand_tree(2, 4, 5, items=2)
    data = random_capacity_instance(tree, 2, 5)
    m = build_adaptive_fixed(tree, data, [3, 2])
    x = x_values(m, solve(m, EXACT).x)
    # resource 0 revises at 3: stages 1-2 common, later decisions follow the stage-3 ancestor
    assert np.ptp(x[0, tree.nodes_at(2)]) == 0
    anc = tree.ancestor_at(3)
    for n in tree.nodes_at(4):
        sibs = [m2 for m2 in tree.nodes_at(4) if anc[m2] == anc[n]]
        assert np.ptp(x[0, sibs]) == 0


def test_requirements_cover_usage():
    tree = random_demand_tree(2, 3, 6, items=2)
    data = random_capacity_instance(tree, 2, 6)
    m = build_multistage(tree, data)
    s = solve(m, EXACT)
    need = requirements(tree, data, m, s.x)
    x = x_values(m, s.x)
    for n in range(tree.n_nodes):
        path = tree.path_to_root(n)
        assert np.all(x[:, path].sum(axis=1) >= need[:, n] - 1e-6)


def test_genexp_default_data_loads():
    g = load_genexp_data()
    assert g.types[0] == "nuclear" and len(g.types) == 6
    assert np.allclose(g.n0 * g.m_eff, [4860, 2618, 2004, 1883, 134, 131])
    assert "PUBLISHED" in json.dumps(g.provenance) and "PLACEHOLDER" in json.dumps(g.provenance)


def test_genexp_models_sandwich():
    g = load_genexp_data()
    tree = generate_tree(TreeGenConfig.with_gamma(2, 3, 0.005, root_demand=tuple(g.root_demand), rng_seed=1))
    cfg = SolverConfig(gap=1e-6)
    v = {k: solve(build_genexp(tree, g, k), cfg) for k in ("ms", "joint", "ts")}
    assert all(s.status == Status.OPTIMAL for s in v.values())
    assert v["ms"].objective <= v["joint"].objective * (1 + 1e-5)
    assert v["joint"].objective <= v["ts"].objective * (1 + 1e-5)
    x = x_values(v["joint"].model, v["joint"].x)
    for leaf in tree.leaves:
        assert np.all(g.n0 + x[:, tree.path_to_root(leaf)].sum(axis=1) <= g.n_max + 1e-6)


def test_genexp_zero_demand_buys_nothing():
    g = load_genexp_data()
    tree = generate_tree(TreeGenConfig(2, 3, (0.0,) * len(g.root_demand), rng_seed=1))
    s = solve(build_genexp(tree, g, "joint"), SolverConfig(gap=1e-6))
    assert np.all(x_values(s.model, s.x) == 0)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**5), data=st.data())
def test_sandwich_property(seed, data):
    T = data.draw(st.integers(2, 3))
    tree = random_demand_tree(2, T, seed, items=1)
    cd = random_capacity_instance(tree, 2, seed)
    rv = [data.draw(st.integers(1, T)) for _ in range(2)]
    vm = solve(build_multistage(tree, cd), EXACT).objective
    vt = solve(build_twostage(tree, cd), EXACT).objective
    va = solve(build_adaptive_fixed(tree, cd, rv), EXACT).objective
    assert vm <= va + 1e-6 and va <= vt + 1e-6
    v1 = solve(build_adaptive_fixed(tree, cd, [1, 1]), EXACT).objective
    assert math.isclose(v1, vt, rel_tol=1e-9, abs_tol=1e-9)
