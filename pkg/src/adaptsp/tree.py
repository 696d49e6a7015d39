"""Scenario trees: storage, navigation, random generation and condensation.

Nodes are dense integers numbered stage by stage (breadth-first), node 0 is
the root and stages are 1-based.  Per-node data lives in named payload
arrays such as ``"a"``, ``"delta"`` or ``"demand[0]"``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidConfig, InvalidRange, InvalidTree, MissingField, UnknownNode

SCHEMA_VERSION = 1
PROB_TOL = 1e-9


class ScenarioTree:
    """Immutable T-stage scenario tree.

    Attributes are read-only numpy arrays: ``parents`` (root has -1),
    ``probabilities``, ``stages`` (1-based) and the ``payloads`` mapping.
    """

    def __init__(self, parents, probabilities, payloads, _stages, _children):
        self.parents = _frozen(np.asarray(parents, dtype=np.int64))
        self.probabilities = _frozen(np.asarray(probabilities, dtype=float))
        self.stages = _frozen(_stages)
        self.payloads = {k: _frozen(np.asarray(v, dtype=float)) for k, v in payloads.items()}
        self._children = _children
        self.stage_count = int(self.stages.max())
        starts = np.searchsorted(self.stages, np.arange(1, self.stage_count + 2))
        self._stage_bounds = starts

    def __len__(self):
        return len(self.parents)

    def __repr__(self):
        return f"ScenarioTree(nodes={len(self)}, stages={self.stage_count}, fields={sorted(self.payloads)})"

    @property
    def n_nodes(self) -> int:
        return len(self.parents)

    def children(self, n: int) -> np.ndarray:
        self._check(n)
        return self._children[n]

    def nodes_at(self, t: int) -> np.ndarray:
        """S_t, the nodes of stage ``t``."""
        if not 1 <= t <= self.stage_count:
            raise InvalidRange(f"stage {t} outside 1..{self.stage_count}")
        lo, hi = self._stage_bounds[t - 1], self._stage_bounds[t]
        return np.arange(lo, hi)

    @property
    def leaves(self) -> np.ndarray:
        return self.nodes_at(self.stage_count)

    def field(self, name: str) -> np.ndarray:
        try:
            return self.payloads[name]
        except KeyError:
            raise MissingField(f"payload field {name!r} not present; have {sorted(self.payloads)}") from None

    def values(self, f) -> np.ndarray:
        """Resolve ``f`` as a payload name or a per-node array."""
        if isinstance(f, str):
            return self.field(f)
        arr = np.asarray(f, dtype=float)
        if arr.shape != (self.n_nodes,):
            raise MissingField(f"expected {self.n_nodes} per-node values, got shape {arr.shape}")
        return arr

    def path_to_root(self, n: int) -> list[int]:
        """P(n): the ancestor chain, root first and ``n`` last."""
        self._check(n)
        path = [int(n)]
        while self.parents[path[-1]] >= 0:
            path.append(int(self.parents[path[-1]]))
        return path[::-1]

    def subtree(self, n: int, t_end: int | None = None) -> list[int]:
        """Nodes of the subtree rooted at ``n`` truncated after stage ``t_end``."""
        self._check(n)
        if t_end is None:
            t_end = self.stage_count
        if not self.stages[n] <= t_end <= self.stage_count:
            raise InvalidRange(f"t_end={t_end} outside [{self.stages[n]}, {self.stage_count}]")
        out, frontier = [int(n)], [int(n)]
        for _ in range(self.stages[n], t_end):
            frontier = [int(c) for m in frontier for c in self._children[m]]
            out.extend(frontier)
        return out

    def ancestor_at(self, t: int) -> np.ndarray:
        """For every node, its ancestor in stage ``t`` (itself if in S_t, -1 if t_n < t)."""
        anc = np.full(self.n_nodes, -1, dtype=np.int64)
        members = self.nodes_at(t)
        anc[members] = members
        for n in range(members[-1] + 1, self.n_nodes):
            anc[n] = anc[self.parents[n]]
        return anc

    def path_max(self, values) -> np.ndarray:
        """Maximum of ``values`` along P(n), for every node n."""
        v = self.values(values)
        out = v.copy()
        for n in range(1, self.n_nodes):
            out[n] = max(out[n], out[self.parents[n]])
        return out

    def subtree_max(self, values) -> np.ndarray:
        """Maximum of ``values`` over the full subtree of each node."""
        v = self.values(values)
        out = v.copy()
        for n in range(self.n_nodes - 1, 0, -1):
            p = self.parents[n]
            if out[n] > out[p]:
                out[p] = out[n]
        return out

    def with_payloads(self, **fields) -> "ScenarioTree":
        payloads = dict(self.payloads)
        payloads.update(fields)
        return build_tree(self.parents, self.probabilities, payloads)

    def truncate(self, stages: int) -> "ScenarioTree":
        """The tree restricted to its first ``stages`` stages."""
        if not 1 <= stages <= self.stage_count:
            raise InvalidRange(f"cannot truncate to {stages} stages")
        k = self._stage_bounds[stages]
        return build_tree(self.parents[:k], self.probabilities[:k],
                          {f: v[:k] for f, v in self.payloads.items()})

    def _check(self, n):
        if not (isinstance(n, (int, np.integer)) and 0 <= n < self.n_nodes):
            raise UnknownNode(f"node {n!r} not in tree of {self.n_nodes} nodes")

    def to_dict(self) -> dict:
        return {
            "version": SCHEMA_VERSION,
            "stage_count": self.stage_count,
            "parents": [None if p < 0 else int(p) for p in self.parents],
            "probabilities": [float(p) for p in self.probabilities],
            "payloads": {k: [float(x) for x in v] for k, v in sorted(self.payloads.items())},
        }


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def build_tree(parents: Sequence, probabilities: Sequence[float],
               payloads: Mapping[str, Sequence[float]] | None = None) -> ScenarioTree:
    """Validate a parent array and per-node data and return a ScenarioTree.

    ``parents[0]`` must be the root (``None`` or -1).  Nodes must be numbered
    so that every stage precedes the next one.
    """
    par = np.array([-1 if p is None else int(p) for p in parents], dtype=np.int64)
    prob = np.asarray(probabilities, dtype=float)
    n = len(par)
    if n == 0:
        raise InvalidTree("tree has no nodes")
    if prob.shape != (n,):
        raise InvalidTree(f"{n} parents but {prob.shape} probabilities")
    roots = np.flatnonzero(par < 0)
    if len(roots) != 1:
        raise InvalidTree(f"expected exactly one root, found {len(roots)}")
    if roots[0] != 0:
        raise InvalidTree("root must be node 0")
    if np.any(par >= n):
        raise InvalidTree("parent index out of range (orphan node)")

    # depth with cycle detection
    stages = np.zeros(n, dtype=np.int64)
    stages[0] = 1
    state = np.zeros(n, dtype=np.int8)  # 0 unseen, 1 on stack, 2 done
    state[0] = 2
    for start in range(1, n):
        chain = []
        m = start
        while state[m] == 0:
            state[m] = 1
            chain.append(m)
            m = par[m]
        if state[m] == 1:
            raise InvalidTree(f"cycle through node {m}")
        for c in reversed(chain):
            stages[c] = stages[par[c]] + 1
            state[c] = 2
    if np.any(np.diff(stages) < 0):
        raise InvalidTree("nodes are not numbered in stage order")
    if not np.all((prob > 0) & (prob <= 1 + PROB_TOL)):
        raise InvalidTree("probabilities must lie in (0, 1]")

    children: list[list[int]] = [[] for _ in range(n)]
    for c in range(1, n):
        children[par[c]].append(c)
    T = int(stages.max())
    for m in range(n):
        if children[m]:
            s = prob[children[m]].sum()
            if abs(s - prob[m]) > PROB_TOL:
                raise InvalidTree(f"children of node {m} carry probability {s}, parent has {prob[m]}")
        elif stages[m] != T:
            raise InvalidTree(f"leaf {m} ends at stage {stages[m]} < {T}")
    for t in range(1, T + 1):
        s = prob[stages == t].sum()
        if abs(s - 1.0) > PROB_TOL:
            raise InvalidTree(f"stage {t} probabilities sum to {s}")

    clean = {}
    for k, v in (payloads or {}).items():
        arr = np.asarray(v, dtype=float)
        if arr.shape != (n,):
            raise InvalidTree(f"payload {k!r} has shape {arr.shape}, expected ({n},)")
        clean[k] = arr
    kids = [_frozen(np.asarray(c, dtype=np.int64)) for c in children]
    return ScenarioTree(par, prob, clean, stages, kids)


def path_to_root(tree: ScenarioTree, n: int) -> list[int]:
    return tree.path_to_root(n)


def subtree(tree: ScenarioTree, n: int, t_end: int | None = None) -> list[int]:
    return tree.subtree(n, t_end)


def tree_from_dict(d: Mapping) -> ScenarioTree:
    if d.get("version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise InvalidTree(f"unsupported tree schema version {d.get('version')}")
    try:
        tree = build_tree(d["parents"], d["probabilities"], d.get("payloads", {}))
    except KeyError as e:
        raise InvalidTree(f"tree JSON lacks {e}") from None
    if "stage_count" in d and d["stage_count"] != tree.stage_count:
        raise InvalidTree(f"stage_count {d['stage_count']} disagrees with parents ({tree.stage_count})")
    return tree


def load_tree(path) -> ScenarioTree:
    return tree_from_dict(json.loads(Path(path).read_text()))


def save_tree(tree: ScenarioTree, path) -> None:
    Path(path).write_text(json.dumps(tree.to_dict(), indent=1) + "\n")


def regular_tree(branches: int, stages: int, payloads=None) -> ScenarioTree:
    """Uniform M-ary tree with branch probability 1/M."""
    if branches < 1 or stages < 1:
        raise InvalidConfig("branches and stages must be positive")
    parents, probs = [None], [1.0]
    level = [0]
    for _ in range(1, stages):
        nxt = []
        for p in level:
            for _j in range(branches):
                parents.append(p)
                probs.append(probs[p] / branches)
                nxt.append(len(parents) - 1)
        level = nxt
    return build_tree(parents, probs, payloads or {})


def node_count(branches: int, stages: int) -> int:
    """(M^T - 1)/(M - 1), or T for a single path."""
    if branches == 1:
        return stages
    return (branches ** stages - 1) // (branches - 1)


# ---------------------------------------------------------------------------
# random generation

@dataclass
class TreeGenConfig:
    """Parameters of the equisized-interval multiplier scheme.

    ``alpha_low``/``alpha_high`` give the multiplier range per stage; a scalar
    applies to every stage, a sequence is indexed by stage 2..T.
    """
    branches: int
    stages: int
    root_demand: Sequence[float] = (1.0,)
    alpha_low: float | Sequence[float] = 1.0
    alpha_high: float | Sequence[float] = 1.2
    rng_seed: int = 0
    shared_draws: bool = False
    field_prefix: str = "demand"

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Arrays lo, hi of length T+1 indexed by stage (entries 0, 1 unused)."""
        T = self.stages
        lo = np.zeros(T + 1)
        hi = np.zeros(T + 1)
        for arr, v in ((lo, self.alpha_low), (hi, self.alpha_high)):
            if np.ndim(v) == 0:
                arr[2:] = float(v)
            else:
                v = np.asarray(v, dtype=float)
                if len(v) != T - 1:
                    raise InvalidConfig(f"per-stage multipliers need {T - 1} entries for stages 2..{T}")
                arr[2:] = v
        return lo, hi

    def validate(self):
        if self.branches < 1:
            raise InvalidConfig("branches must be >= 1")
        if self.stages < 1:
            raise InvalidConfig("stages must be >= 1")
        if len(self.root_demand) == 0:
            raise InvalidConfig("root_demand needs at least one subperiod")
        lo, hi = self.bounds()
        if np.any(lo[2:] > hi[2:]):
            raise InvalidConfig("alpha_low must not exceed alpha_high")

    @classmethod
    def with_gamma(cls, branches, stages, gamma, **kw) -> "TreeGenConfig":
        """Multipliers widening with the stage: [1 - gamma*t, 1.2 + gamma*t]."""
        t = np.arange(2, stages + 1)
        return cls(branches, stages, alpha_low=list(1.0 - gamma * t),
                   alpha_high=list(1.2 + gamma * t), **kw)


def generate_tree(config: TreeGenConfig) -> ScenarioTree:
    """Sample a demand tree.

    The j-th child of every node scales its parent's demand by a factor drawn
    uniformly from the j-th of M equal slices of [alpha_low_t, alpha_high_t].
    Each node and subperiod gets its own draw unless ``shared_draws`` is set,
    in which case all children with the same (stage, j) share one factor per
    subperiod.
    """
    config.validate()
    M, T = config.branches, config.stages
    lo, hi = config.bounds()
    base = regular_tree(M, T)
    K = len(config.root_demand)
    rng = np.random.default_rng(config.rng_seed)
    demand = np.zeros((K, base.n_nodes))
    demand[:, 0] = config.root_demand
    for t in range(2, T + 1):
        nodes = base.nodes_at(t)
        j = (nodes - nodes[0]) % M  # child index within parent
        step = (hi[t] - lo[t]) / M
        if config.shared_draws:
            u = rng.random((K, M))[:, j]
        else:
            u = rng.random((K, len(nodes)))
        beta = lo[t] + step * (j + u)
        demand[:, nodes] = beta * demand[:, base.parents[nodes]]
    fields = {f"{config.field_prefix}[{k}]": demand[k] for k in range(K)}
    return base.with_payloads(**fields)


# ---------------------------------------------------------------------------
# condensation

def revision_groups(tree: ScenarioTree, t_star: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Map base nodes to condensed nodes for revision time ``t_star``.

    Returns ``(group, parent, stage)``: ``group[n]`` is the condensed node of
    base node n, and ``parent``/``stage`` describe the condensed tree.
    Condensed nodes are one per stage before ``t_star``, then one per
    (revision-stage node, stage) pair, numbered stage by stage.
    """
    T = tree.stage_count
    if not 1 <= t_star <= T:
        raise InvalidRange(f"revision time {t_star} outside 1..{T}")
    group = np.empty(tree.n_nodes, dtype=np.int64)
    parent, stage = [], []
    for t in range(1, t_star):
        group[tree.nodes_at(t)] = t - 1
        parent.append(t - 2)
        stage.append(t)
    anchors = tree.nodes_at(t_star)
    anc = tree.ancestor_at(t_star)
    rank = np.full(tree.n_nodes, -1, dtype=np.int64)
    rank[anchors] = np.arange(len(anchors))
    J = len(anchors)
    first = t_star - 1
    for t in range(t_star, T + 1):
        nodes = tree.nodes_at(t)
        group[nodes] = first + (t - t_star) * J + rank[anc[nodes]]
        for r in range(J):
            if t == t_star:
                parent.append(t_star - 2)
            else:
                parent.append(first + (t - 1 - t_star) * J + r)
            stage.append(t)
    return group, np.asarray(parent, dtype=np.int64), np.asarray(stage, dtype=np.int64)


@dataclass(frozen=True)
class CondensedTree:
    base: ScenarioTree = field(repr=False)
    revision_time: int
    parents: np.ndarray
    stages: np.ndarray
    node_map: np.ndarray = field(repr=False)
    p_hat: np.ndarray
    a_hat: np.ndarray
    delta_hat: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.parents)

    def cluster(self, c: int) -> np.ndarray:
        """Base nodes merged into condensed node ``c``."""
        return np.flatnonzero(self.node_map == c)

    def path_to_root(self, c: int) -> list[int]:
        path = [int(c)]
        while self.parents[path[-1]] >= 0:
            path.append(int(self.parents[path[-1]]))
        return path[::-1]


def condense(tree: ScenarioTree, t_star: int, cost_field="a", demand_field="delta") -> CondensedTree:
    """Merge stage siblings before ``t_star`` and subtree siblings after it.

    ``p_hat`` sums probabilities, ``a_hat`` sums probability-weighted costs
    and ``delta_hat`` takes the maximum demand of each cluster.
    """
    a = tree.values(cost_field)
    d = tree.values(demand_field)
    group, parent, stage = revision_groups(tree, t_star)
    C = len(parent)
    p_hat = np.bincount(group, weights=tree.probabilities, minlength=C)
    a_hat = np.bincount(group, weights=tree.probabilities * a, minlength=C)
    d_hat = np.full(C, -np.inf)
    np.maximum.at(d_hat, group, d)
    return CondensedTree(tree, int(t_star), _frozen(parent), _frozen(stage), _frozen(group),
                         _frozen(p_hat), _frozen(a_hat), _frozen(d_hat))


def illustrative_tree() -> ScenarioTree:
    """The 31-node, 5-stage binary illustration tree with unit costs."""
    from importlib.resources import files
    text = files("adaptsp.data").joinpath("illustrative_tree.json").read_text()
    return tree_from_dict(json.loads(text))
