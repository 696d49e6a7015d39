"""Seeded random instances for experiments and property checks."""
from __future__ import annotations

import numpy as np

from .formulations import CapacityExpansionData
from .tree import ScenarioTree, TreeGenConfig, build_tree, generate_tree, regular_tree


def random_demand_tree(branches: int, stages: int, seed: int, items: int = 1, root=(2.0, 8.0),
                       alpha=(0.8, 1.4)) -> ScenarioTree:
    rng = np.random.default_rng(seed)
    root_demand = rng.uniform(*root, size=items)
    cfg = TreeGenConfig(branches, stages, tuple(root_demand), alpha[0], alpha[1], rng_seed=int(rng.integers(2**31)))
    return generate_tree(cfg)


def random_capacity_instance(tree: ScenarioTree, resources: int, seed: int, items: int | None = None,
                             cost_range=(0.5, 2.0), unit_costs: bool = False) -> CapacityExpansionData:
    """Capacity data where task (i, k) serves item k from resource i.

    Demand of item k is read from payload ``demand[k]`` when present,
    otherwise drawn uniformly from [1, 10].
    """
    rng = np.random.default_rng(seed)
    N = tree.n_nodes
    K = items if items is not None else sum(1 for f in tree.payloads if f.startswith("demand["))
    K = max(K, 1)
    I, J = resources, resources * K
    if unit_costs:
        a = np.ones((N, I))
    else:
        a = rng.uniform(*cost_range, size=(N, I))
    b = rng.uniform(0.05, 0.5, size=(N, J))
    A = np.zeros((N, I, J))
    B = np.zeros((N, K, J))
    rate = rng.uniform(0.5, 1.5, size=(I, K))
    for i in range(I):
        for k in range(K):
            j = i * K + k
            A[:, i, j] = rate[i, k]
            B[:, k, j] = 1.0
    d = np.column_stack([tree.payloads.get(f"demand[{k}]", rng.uniform(1, 10, size=N)) for k in range(K)])
    return CapacityExpansionData(a, b, A, B, d)


def random_single_resource_tree(branches: int, stages: int, seed: int, unit_costs: bool = False,
                                integer: bool = False) -> ScenarioTree:
    """Regular tree with random costs ``a`` in [0.5, 2] and requirements ``delta`` in [0, 50]."""
    rng = np.random.default_rng(seed)
    t = regular_tree(branches, stages)
    a = np.ones(t.n_nodes) if unit_costs else rng.uniform(0.5, 2.0, t.n_nodes)
    delta = rng.integers(0, 51, t.n_nodes).astype(float) if integer else rng.uniform(0, 50, t.n_nodes)
    return t.with_payloads(a=a, delta=delta)


def stagewise_independent_tree(branches: int, stages: int, seed: int) -> ScenarioTree:
    """Every node of stage t-1 has the same M child realisations; the root holds the smallest value."""
    rng = np.random.default_rng(seed)
    t = regular_tree(branches, stages)
    stage_vals = {s: rng.uniform(10, 100, branches) for s in range(2, stages + 1)}
    delta = np.empty(t.n_nodes)
    delta[0] = 10.0 * rng.random()
    for s in range(2, stages + 1):
        nodes = t.nodes_at(s)
        delta[nodes] = stage_vals[s][(nodes - nodes[0]) % branches]
    return t.with_payloads(a=np.ones(t.n_nodes), delta=delta)
