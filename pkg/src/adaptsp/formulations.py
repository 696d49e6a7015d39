"""Compile scenario trees and problem data into LP/MILP models.

Every formulation shares one skeleton: state variables x (capacity
acquisitions, one per resource and node) feed cumulative capacity along each
root-to-node path, and per-node operating variables use that capacity.  The
variants differ only in how x is shared between nodes:

``ms``     every node has its own x (multi-stage).
``ts``     one x per resource and stage (two-stage).
``fixed``  x shared per stage before the resource's revision time and per
           revision-stage subtree and stage afterwards (condensed tree).
``joint``  per-node x tied together by big-M pair constraints whose
           activation is chosen by binary revision indicators r.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib.resources import files
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import BadBigM, DimensionMismatch, InvalidData, InvalidRevision, MissingField
from .model import EQ, GE, LE, ModelBuilder, ModelInstance, SolverConfig, Status, relax, solve
from .tree import ScenarioTree, condense, revision_groups


@dataclass(frozen=True)
class RevisionVector:
    """One revision period per resource, each in 1..T."""
    t_star: tuple

    def __init__(self, t_star):
        object.__setattr__(self, "t_star", tuple(int(t) for t in np.atleast_1d(t_star)))

    def __len__(self):
        return len(self.t_star)

    def __iter__(self):
        return iter(self.t_star)

    def __getitem__(self, i):
        return self.t_star[i]

    def validate(self, T: int, n_resources: int | None = None) -> "RevisionVector":
        if n_resources is not None and len(self.t_star) != n_resources:
            raise InvalidRevision(f"{len(self.t_star)} revision times for {n_resources} resources")
        for t in self.t_star:
            if not 1 <= t <= T:
                raise InvalidRevision(f"revision time {t} outside 1..{T}")
        return self

    @classmethod
    def parse(cls, text: str) -> "RevisionVector":
        return cls([int(s) for s in text.replace(" ", "").split(",") if s])


@dataclass(frozen=True)
class Structure:
    kind: str  # "ms" | "ts" | "fixed" | "joint"
    revisions: RevisionVector | None = None
    x_upper: np.ndarray | None = None
    relax_x: bool = False
    relax_r: bool = False


# ---------------------------------------------------------------------------
# problem data

@dataclass
class CapacityExpansionData:
    """Per-node data of the generic capacity expansion model.

    Shapes: ``a`` (N, I) acquisition cost, ``b`` (N, J) allocation cost,
    ``A`` (N, I, J) capacity use, ``B`` (N, K, J) item coverage, ``d`` (N, K)
    demand.  ``x_upper`` optionally gives a known valid bound on any single
    acquisition in an optimal solution (used as big-M).
    """
    a: np.ndarray
    b: np.ndarray
    A: np.ndarray
    B: np.ndarray
    d: np.ndarray
    x_upper: np.ndarray | None = None

    def __post_init__(self):
        self.a = np.atleast_2d(np.asarray(self.a, dtype=float))
        self.b = np.atleast_2d(np.asarray(self.b, dtype=float))
        self.A = np.asarray(self.A, dtype=float)
        self.B = np.asarray(self.B, dtype=float)
        self.d = np.atleast_2d(np.asarray(self.d, dtype=float))
        if self.x_upper is not None:
            self.x_upper = np.atleast_1d(np.asarray(self.x_upper, dtype=float))

    @property
    def n_resources(self) -> int:
        return self.a.shape[1]

    def validate(self, tree: ScenarioTree) -> "CapacityExpansionData":
        N = tree.n_nodes
        I, J, K = self.a.shape[1], self.b.shape[1], self.d.shape[1]
        expect = {"a": (N, I), "b": (N, J), "A": (N, I, J), "B": (N, K, J), "d": (N, K)}
        for name, shape in expect.items():
            if getattr(self, name).shape != shape:
                raise DimensionMismatch(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if self.x_upper is not None and self.x_upper.shape != (I,):
            raise DimensionMismatch(f"x_upper needs {I} entries")
        if np.any(self.a < 0) or np.any(self.b < 0):
            raise InvalidData("costs must be nonnegative")
        return self

    def acquisition_costs(self, tree) -> np.ndarray:
        return self.a.T.copy()

    def to_dict(self) -> dict:
        out = {"kind": "capacity", "a": self.a.tolist(), "b": self.b.tolist(), "A": self.A.tolist(),
               "B": self.B.tolist(), "d": self.d.tolist()}
        if self.x_upper is not None:
            out["x_upper"] = self.x_upper.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict, tree: ScenarioTree | None = None) -> "CapacityExpansionData":
        """Arrays may be given per node or once (broadcast to every node)."""
        N = tree.n_nodes if tree is not None else None

        def get(key, ndim):
            if key not in d:
                raise MissingField(f"capacity data lacks {key!r}")
            arr = np.asarray(d[key], dtype=float)
            if arr.ndim == ndim - 1 and N is not None:
                arr = np.broadcast_to(arr, (N,) + arr.shape).copy()
            return arr

        return cls(get("a", 2), get("b", 2), get("A", 3), get("B", 3), get("d", 2), d.get("x_upper"))


def single_resource_data(tree: ScenarioTree, a_field="a", delta_field="delta", b: float = 0.0):
    """Wrap a single-resource instance as capacity data (A = B = 1, d = delta)."""
    a = tree.values(a_field)
    delta = tree.values(delta_field)
    N = tree.n_nodes
    ones = np.ones((N, 1, 1))
    x_up = max(1.0, math.ceil(float(delta.max()) - 1e-9))
    return CapacityExpansionData(a[:, None], np.full((N, 1), b), ones, ones, delta[:, None], [x_up])


@dataclass
class GenExpData:
    """Generation expansion data.

    Stage-dependent costs follow yearly multipliers:
    ``c_it = c_i * acquisition_trend_i**(t-1)`` and the operating cost
    ``(g + k)`` grows by ``fuel_trend`` (applied to g) and ``om_trend``
    (applied to k).  Costs are in thousands of dollars.
    """
    types: tuple
    subperiods: tuple
    n0: np.ndarray
    n_max: np.ndarray
    m_max: np.ndarray
    m_eff: np.ndarray
    peak: np.ndarray
    acquisition: np.ndarray
    fixed_om: np.ndarray
    fuel: np.ndarray
    var_om: np.ndarray
    acquisition_trend: np.ndarray
    fuel_trend: np.ndarray
    om_trend: np.ndarray
    hours: np.ndarray
    penalty: float
    rate: float
    root_demand: np.ndarray
    traditional: np.ndarray
    demand_prefix: str = "demand"
    provenance: dict = field(default_factory=dict)

    _ARRAYS = ("n0", "n_max", "m_max", "m_eff", "peak", "acquisition", "fixed_om", "fuel", "var_om",
               "acquisition_trend", "fuel_trend", "om_trend", "hours", "root_demand")

    def __post_init__(self):
        for k in self._ARRAYS:
            setattr(self, k, np.asarray(getattr(self, k), dtype=float))
        self.traditional = np.asarray(self.traditional, dtype=bool)
        self.types = tuple(self.types)
        self.subperiods = tuple(self.subperiods)

    @property
    def n_resources(self) -> int:
        return len(self.types)

    def validate(self, tree: ScenarioTree | None = None) -> "GenExpData":
        I, K = len(self.types), len(self.subperiods)
        for k in ("n0", "n_max", "m_max", "m_eff", "peak", "acquisition", "fixed_om", "fuel", "var_om",
                  "acquisition_trend", "fuel_trend", "om_trend"):
            if getattr(self, k).shape != (I,):
                raise DimensionMismatch(f"{k} needs {I} entries")
        if self.root_demand.shape != (K,):
            raise DimensionMismatch(f"root_demand needs {K} entries")
        if self.hours.shape[0] != K or self.hours.ndim not in (1, 2):
            raise DimensionMismatch("hours must be (K,) or (K, T)")
        if self.traditional.shape != (I,):
            raise DimensionMismatch("traditional flags need one entry per type")
        if np.any(self.n0 < 0) or np.any(self.n_max < self.n0):
            raise InvalidData("need 0 <= n0 <= n_max")
        if np.any(self.m_eff > self.m_max) or np.any(self.m_eff <= 0):
            raise InvalidData("need 0 < effective capacity <= maximum capacity")
        if np.any(self.peak <= 0) or np.any(self.peak > 1):
            raise InvalidData("peak contribution ratios must lie in (0, 1]")
        if not 0 <= self.rate < 1:
            raise InvalidData("interest rate must lie in [0, 1)")
        if np.any(self.n_max[self.traditional] > 1.2 * self.n0[self.traditional] + 1e-9):
            raise InvalidData("traditional types may expand by at most 20% of their initial count")
        for k in ("acquisition", "fixed_om", "fuel", "var_om"):
            if np.any(getattr(self, k) < 0):
                raise InvalidData(f"{k} costs must be nonnegative")
        if self.penalty < 0:
            raise InvalidData("penalty must be nonnegative")
        if tree is not None:
            self.demand(tree)
            if self.hours.ndim == 2 and self.hours.shape[1] < tree.stage_count:
                raise DimensionMismatch("hours table shorter than the horizon")
        return self

    def demand(self, tree: ScenarioTree) -> np.ndarray:
        """(K, N) hourly demand from payload fields ``demand[k]``."""
        return np.vstack([tree.field(f"{self.demand_prefix}[{k}]") for k in range(len(self.subperiods))])

    def hours_at(self, t: int) -> np.ndarray:
        return self.hours if self.hours.ndim == 1 else self.hours[:, t - 1]

    def discount(self, t) -> np.ndarray:
        return 1.0 / (1.0 + self.rate) ** (np.asarray(t) - 1)

    def stage_costs(self, t: int) -> dict:
        e = t - 1
        return {
            "c": self.acquisition * self.acquisition_trend ** e,
            "f": self.fixed_om,
            "g": self.fuel * self.fuel_trend ** e,
            "k": self.var_om * self.om_trend ** e,
        }

    def acquisition_costs(self, tree: ScenarioTree) -> np.ndarray:
        """(I, N) discounted cost of one unit bought at each node (probability excluded)."""
        T = tree.stage_count
        out = np.zeros((self.n_resources, tree.n_nodes))
        for t in range(1, T + 1):
            sc = self.stage_costs(t)
            om = sc["f"] * sum(1.0 / (1.0 + self.rate) ** (s - t) for s in range(t, T + 1))
            out[:, tree.nodes_at(t)] = (self.discount(t) * (sc["c"] + om) * self.m_max)[:, None]
        return out

    def to_dict(self) -> dict:
        out = {"kind": "genexp", "types": list(self.types), "subperiods": list(self.subperiods)}
        for k in self._ARRAYS:
            out[k] = getattr(self, k).tolist()
        out.update(traditional=self.traditional.tolist(), penalty=self.penalty, rate=self.rate,
                   demand_prefix=self.demand_prefix, PROVENANCE=self.provenance)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "GenExpData":
        kw = {k: d[k] for k in ("types", "subperiods", *cls._ARRAYS, "traditional", "penalty", "rate")
              if k in d}
        missing = {"types", "subperiods", *cls._ARRAYS, "traditional", "penalty", "rate"} - set(kw)
        if missing:
            raise MissingField(f"genexp data lacks {sorted(missing)}")
        return cls(**kw, demand_prefix=d.get("demand_prefix", "demand"), provenance=d.get("PROVENANCE", {}))


def load_genexp_data(path=None) -> GenExpData:
    """Load generation data; the bundled placeholder set when ``path`` is None."""
    if path is None:
        text = files("adaptsp.data").joinpath("genexp_default.json").read_text()
    else:
        text = Path(path).read_text()
    return GenExpData.from_dict(json.loads(text)).validate()


def load_problem_data(path, tree: ScenarioTree | None = None):
    d = json.loads(Path(path).read_text())
    kind = d.get("kind")
    if kind == "genexp":
        return GenExpData.from_dict(d).validate(tree)
    if kind == "capacity":
        data = CapacityExpansionData.from_dict(d, tree)
        return data.validate(tree) if tree is not None else data
    if kind == "single":
        if tree is None:
            raise MissingField("single-resource data needs a tree")
        return single_resource_data(tree, d.get("a", "a"), d.get("delta", "delta"), d.get("b", 0.0))
    raise InvalidData(f"unknown data kind {kind!r}; expected capacity, genexp or single")


# ---------------------------------------------------------------------------
# model assembly

def _groups(tree: ScenarioTree, structure: Structure, i: int) -> np.ndarray:
    if structure.kind in ("ms", "joint"):
        return np.arange(tree.n_nodes)
    if structure.kind == "ts":
        return tree.stages - 1
    if structure.kind == "fixed":
        return revision_groups(tree, structure.revisions[i])[0]
    raise ValueError(f"unknown structure {structure.kind!r}")


def _x_block(b: ModelBuilder, tree: ScenarioTree, costs: np.ndarray, structure: Structure,
             x_upper=None) -> np.ndarray:
    """Create the (shared) x variables; returns (I, N) variable indices."""
    I, N = costs.shape
    p = tree.probabilities
    xidx = np.empty((I, N), dtype=np.int64)
    integer = not structure.relax_x
    for i in range(I):
        g = _groups(tree, structure, i)
        G = int(g.max()) + 1
        coef = np.bincount(g, weights=p * costs[i], minlength=G)
        first = np.full(G, -1)
        for n in range(N - 1, -1, -1):
            first[g[n]] = n
        ub = math.inf if x_upper is None else float(x_upper[i])
        gv = np.array([b.add_var(f"x_{i}_{first[k]}", 0.0, ub, integer, coef[k]) for k in range(G)])
        xidx[i] = gv[g]
    return xidx


def _path_vars(tree: ScenarioTree, xidx: np.ndarray) -> np.ndarray:
    """(I, N, T) x indices along each root path, -1 beyond the node's stage."""
    I, N = xidx.shape
    pv = np.full((I, N, tree.stage_count), -1, dtype=np.int64)
    pv[:, 0, 0] = xidx[:, 0]
    for n in range(1, N):
        pv[:, n, :] = pv[:, tree.parents[n], :]
        pv[:, n, tree.stages[n] - 1] = xidx[:, n]
    return pv


def _joint_block(b: ModelBuilder, tree: ScenarioTree, xidx: np.ndarray, x_upper, relax_r=False):
    """Revision indicators and big-M pair constraints against stage representatives."""
    I = xidx.shape[0]
    T = tree.stage_count
    r = np.array([[b.add_var(f"r_{i}_{t}", 0.0, 1.0, not relax_r) for t in range(1, T + 1)] for i in range(I)])
    ancestors = {t: tree.ancestor_at(t) for t in range(1, T + 1)}
    for i in range(I):
        M = float(x_upper[i])
        b.add_constr({int(v): 1.0 for v in r[i]}, EQ, 1.0, f"rev_{i}")
        # before revision: stage siblings agree unless the revision is at or before t
        for t in range(1, T):
            nodes = tree.nodes_at(t)
            rep = xidx[i, nodes[0]]
            later = {int(r[i, s - 1]): M for s in range(t + 1, T + 1)}
            for n in nodes[1:]:
                b.add_constr({int(xidx[i, n]): 1.0, int(rep): -1.0, **later}, LE, M, f"pre_{i}_{t}_{n}a")
                b.add_constr({int(xidx[i, n]): -1.0, int(rep): 1.0, **later}, LE, M, f"pre_{i}_{t}_{n}b")
        # after revision at t: nodes of one stage inside one subtree of S_t agree
        for t in range(1, T + 1):
            anc = ancestors[t]
            rv = int(r[i, t - 1])
            for s in range(t + 1, T + 1):
                nodes = tree.nodes_at(s)
                keys = anc[nodes]
                starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
                ends = np.r_[starts[1:], len(nodes)]
                for lo, hi in zip(starts, ends):
                    rep = int(xidx[i, nodes[lo]])
                    for n in nodes[lo + 1:hi]:
                        xv = int(xidx[i, n])
                        b.add_constr({xv: 1.0, rep: -1.0, rv: M}, LE, M, f"post_{i}_{t}_{n}a")
                        b.add_constr({xv: -1.0, rep: 1.0, rv: M}, LE, M, f"post_{i}_{t}_{n}b")
    return r


def _capacity_ops(b: ModelBuilder, tree: ScenarioTree, data: CapacityExpansionData, pv: np.ndarray) -> dict:
    N = tree.n_nodes
    I, J, K = data.a.shape[1], data.b.shape[1], data.d.shape[1]
    p = tree.probabilities
    y = np.empty((N, J), dtype=np.int64)
    for n in range(N):
        for j in range(J):
            y[n, j] = b.add_var(f"y_{n}_{j}", 0.0, math.inf, False, p[n] * data.b[n, j])
    for n in range(N):
        t = tree.stages[n]
        for i in range(I):
            row = {int(y[n, j]): data.A[n, i, j] for j in range(J) if data.A[n, i, j]}
            for v in pv[i, n, :t]:
                row[int(v)] = row.get(int(v), 0.0) - 1.0
            b.add_constr(row, LE, 0.0, f"cap_{i}_{n}")
        for k in range(K):
            row = {int(y[n, j]): data.B[n, k, j] for j in range(J) if data.B[n, k, j]}
            b.add_constr(row, GE, data.d[n, k], f"dem_{k}_{n}")
    return {"y": y}


def _genexp_ops(b: ModelBuilder, tree: ScenarioTree, data: GenExpData, pv: np.ndarray) -> dict:
    N = tree.n_nodes
    I, K = data.n_resources, len(data.subperiods)
    T = tree.stage_count
    p = tree.probabilities
    dem = data.demand(tree)
    u = np.empty((I, K, N), dtype=np.int64)
    v = np.empty((K, N), dtype=np.int64)
    for n in range(N):
        t = int(tree.stages[n])
        sc = data.stage_costs(t)
        h = data.hours_at(t)
        w = p[n] * data.discount(t)
        for i in range(I):
            for k in range(K):
                u[i, k, n] = b.add_var(f"u_{i}_{k}_{n}", 0.0, math.inf, False, w * (sc["g"][i] + sc["k"][i]) * h[k])
        for k in range(K):
            v[k, n] = b.add_var(f"v_{k}_{n}", 0.0, math.inf, False, w * data.penalty * h[k])
    for n in range(N):
        t = int(tree.stages[n])
        for i in range(I):
            path = [int(x) for x in pv[i, n, :t]]
            for k in range(K):
                row = {int(u[i, k, n]): 1.0 / data.m_eff[i]}
                for x in path:
                    row[x] = row.get(x, 0.0) - 1.0
                b.add_constr(row, LE, data.n0[i], f"cap_{i}_{k}_{n}")
        for k in range(K):
            row = {int(u[i, k, n]): data.peak[i] for i in range(I)}
            row[int(v[k, n])] = 1.0
            b.add_constr(row, GE, dem[k, n], f"dem_{k}_{n}")
        if t == T:
            for i in range(I):
                row = {}
                for x in pv[i, n, :t]:
                    row[int(x)] = row.get(int(x), 0.0) + 1.0
                b.add_constr(row, LE, data.n_max[i] - data.n0[i], f"lim_{i}_{n}")
    return {"u": u, "v": v}


def compile_model(tree: ScenarioTree, data, structure: Structure, name: str | None = None) -> ModelInstance:
    """Assemble the model for ``data`` (capacity or generation expansion)."""
    if isinstance(data, GenExpData):
        data.validate(tree)
    else:
        data.validate(tree)
    I = data.n_resources
    T = tree.stage_count
    if structure.kind == "fixed":
        if structure.revisions is None:
            raise InvalidRevision("fixed structure needs a revision vector")
        structure.revisions.validate(T, I)
    costs = data.acquisition_costs(tree)
    if np.any(costs < 0):
        raise InvalidData("negative acquisition costs admit no valid big-M bound")
    b = ModelBuilder(name or f"{structure.kind}")
    x_upper = structure.x_upper if structure.kind == "joint" else None
    if structure.kind == "joint" and x_upper is None:
        raise BadBigM("joint model needs x_upper")
    xidx = _x_block(b, tree, costs, structure, x_upper)
    pv = _path_vars(tree, xidx)
    r = _joint_block(b, tree, xidx, x_upper, structure.relax_r) if structure.kind == "joint" else None
    if isinstance(data, GenExpData):
        ops = _genexp_ops(b, tree, data, pv)
    else:
        ops = _capacity_ops(b, tree, data, pv)
    b.meta.update(x=xidx, r=r, structure=structure.kind,
                  revisions=None if structure.revisions is None else structure.revisions.t_star, **ops)
    return b.build()


def build_multistage(tree: ScenarioTree, data) -> ModelInstance:
    return compile_model(tree, data, Structure("ms"), "multistage")


def build_twostage(tree: ScenarioTree, data) -> ModelInstance:
    return compile_model(tree, data, Structure("ts"), "twostage")


def build_adaptive_fixed(tree: ScenarioTree, data, revisions) -> ModelInstance:
    if not isinstance(revisions, RevisionVector):
        revisions = RevisionVector(revisions)
    return compile_model(tree, data, Structure("fixed", revisions), "adaptive_fixed")


def build_adaptive_joint(tree: ScenarioTree, data, x_upper=None, relax_x=False, relax_r=False,
                         config: SolverConfig | None = None) -> ModelInstance:
    """Joint revision-time model.  ``x_upper`` defaults to :func:`default_x_upper`."""
    if x_upper is None:
        x_upper = default_x_upper(tree, data, config)
    else:
        x_upper = np.broadcast_to(np.asarray(x_upper, dtype=float), (data.n_resources,)).copy()
        _check_big_m(tree, data, x_upper, config)
    return compile_model(tree, data, Structure("joint", x_upper=x_upper, relax_x=relax_x, relax_r=relax_r),
                         "adaptive_joint")


def build_genexp(tree: ScenarioTree, gendata: GenExpData, revisions_or_joint="joint", relax_x=False) -> ModelInstance:
    """Generation expansion model: ``"joint"``, ``"ms"``, ``"ts"`` or a revision vector."""
    if isinstance(revisions_or_joint, str):
        if revisions_or_joint == "joint":
            return compile_model(tree, gendata, Structure("joint", x_upper=gendata.n_max.copy(), relax_x=relax_x),
                                 "genexp_joint")
        if revisions_or_joint in ("ms", "ts"):
            return compile_model(tree, gendata, Structure(revisions_or_joint, relax_x=relax_x),
                                 f"genexp_{revisions_or_joint}")
        raise InvalidRevision(f"unknown genexp structure {revisions_or_joint!r}")
    rv = revisions_or_joint if isinstance(revisions_or_joint, RevisionVector) else RevisionVector(revisions_or_joint)
    return compile_model(tree, gendata, Structure("fixed", rv, relax_x=relax_x), "genexp_fixed")


def default_x_upper(tree: ScenarioTree, data, config: SolverConfig | None = None) -> np.ndarray:
    """A big-M no smaller than any acquisition in some optimal solution.

    Generation data: ``n_max``.  Capacity data with a stored ``x_upper``: that
    value.  Otherwise a cost bound: an integer two-stage solution (the rounded
    up two-stage LP) costs U, and every term p_n a_in x_in of an optimal
    solution is at most U.
    """
    if isinstance(data, GenExpData):
        return data.n_max.copy()
    if data.x_upper is not None:
        return data.x_upper.copy()
    costs = data.acquisition_costs(tree) * tree.probabilities
    if np.any(costs <= 0):
        raise BadBigM("zero acquisition cost leaves x unbounded; pass x_upper explicitly")
    model = relax(build_twostage(tree, data))
    sol = solve(model, config or SolverConfig())
    if sol.status != Status.OPTIMAL:
        raise BadBigM(f"two-stage relaxation is {sol.status}; cannot derive x_upper")
    x = sol.x.copy()
    xi = np.unique(model.meta["x"])
    x[xi] = np.ceil(x[xi] - 1e-9)
    U = model.objective_of(x)
    return np.maximum(1.0, np.ceil(U / costs.min(axis=1) + 1e-9))


def _check_big_m(tree, data, x_upper, config):
    if np.any(~np.isfinite(x_upper)) or np.any(x_upper < 0):
        raise BadBigM("x_upper must be finite and nonnegative")
    cfg = config or SolverConfig()
    base = relax(build_multistage(tree, data))
    capped = ModelBuilder.from_model(base)
    for i, row in enumerate(base.meta["x"]):
        for v in np.unique(row):
            capped._ub[v] = min(capped._ub[v], float(x_upper[i]))
    if solve(base, cfg).status == Status.OPTIMAL and solve(capped.build(), cfg).status == Status.INFEASIBLE:
        raise BadBigM(f"x_upper {x_upper.tolist()} excludes every feasible solution")


def restrict_single_period(model: ModelInstance, tree: ScenarioTree, x_upper) -> ModelInstance:
    """Allow each resource to acquire in at most one period (same period in every scenario)."""
    b = ModelBuilder.from_model(model)
    xidx = model.meta["x"]
    T = tree.stage_count
    for i in range(xidx.shape[0]):
        z = [b.add_var(f"z_{i}_{t}", 0.0, 1.0, True) for t in range(1, T + 1)]
        b.add_constr({v: 1.0 for v in z}, LE, 1.0, f"one_{i}")
        for v in np.unique(xidx[i]):
            n = int(np.flatnonzero(xidx[i] == v)[0])
            b.add_constr({int(v): 1.0, z[tree.stages[n] - 1]: -float(x_upper[i])}, LE, 0.0, f"on_{i}_{v}")
    b.name = model.name + "_single_period"
    return b.build()


# ---------------------------------------------------------------------------
# single-resource cumulative coverage models

def condensed_model(ctree, integer: bool = True) -> ModelInstance:
    """min sum a_hat x  s.t.  cumulative x along condensed paths >= delta_hat."""
    b = ModelBuilder(f"condensed_t{ctree.revision_time}")
    C = ctree.n_nodes
    x = [b.add_var(f"x_0_{c}", 0.0, math.inf, integer, ctree.a_hat[c]) for c in range(C)]
    path: list[list[int]] = []
    for c in range(C):
        p = ctree.parents[c]
        path.append((path[p] if p >= 0 else []) + [x[c]])
        b.add_constr({v: 1.0 for v in path[c]}, GE, ctree.delta_hat[c], f"cov_{c}")
    b.meta.update(x=np.asarray(x)[ctree.node_map][None, :], structure="condensed")
    return b.build()


def build_single_resource(tree: ScenarioTree, a_field="a", delta_field="delta", mode: str = "multi",
                          t_star: int | None = None) -> ModelInstance:
    """Cumulative coverage model sum_{m in P(n)} x_m >= delta_n.

    ``mode`` is ``multi`` (per-node x), ``two`` (per-stage x), ``adaptive``
    (condensed tree for ``t_star``) or ``joint`` (revision time chosen by the
    model, big-M = ceil(max delta)).
    """
    a = tree.values(a_field)
    delta = tree.values(delta_field)
    if np.any(a < 0):
        raise InvalidData("negative acquisition costs")
    if mode == "adaptive":
        if t_star is None:
            raise InvalidRevision("adaptive mode needs t_star")
        return condensed_model(condense(tree, t_star, a, delta))
    if t_star is not None:
        raise InvalidRevision("t_star is only meaningful in adaptive mode")
    if mode == "two":
        return condensed_model(condense(tree, 1, a, delta))
    if mode == "multi":
        b = ModelBuilder("single_multi")
        x = [b.add_var(f"x_0_{n}", 0.0, math.inf, True, tree.probabilities[n] * a[n]) for n in range(tree.n_nodes)]
        path: list[list[int]] = []
        for n in range(tree.n_nodes):
            p = tree.parents[n]
            path.append((path[p] if p >= 0 else []) + [x[n]])
            b.add_constr({v: 1.0 for v in path[n]}, GE, delta[n], f"cov_{n}")
        b.meta.update(x=np.asarray(x)[None, :], structure="ms")
        return b.build()
    if mode == "joint":
        return build_adaptive_joint(tree, single_resource_data(tree, a, delta))
    raise ValueError(f"unknown mode {mode!r}")


def single_resource_value(tree: ScenarioTree, a, delta, mode: str, t_star: int | None = None,
                          integer: bool = False, config: SolverConfig | None = None) -> float:
    """Optimal value of the single-resource model (LP relaxation by default)."""
    m = build_single_resource(tree, a, delta, mode, t_star)
    if not integer:
        m = relax(m)
    sol = solve(m, config or SolverConfig(gap=1e-9))
    if sol.status != Status.OPTIMAL:
        from .errors import SolverFailure
        raise SolverFailure(f"single-resource {mode} model: {sol.status}")
    return sol.objective


def requirements(tree: ScenarioTree, data, model: ModelInstance, x: np.ndarray) -> np.ndarray:
    """(I, N) capacity each node needs of each resource under the operating decisions in ``x``."""
    if isinstance(data, GenExpData):
        u = x[model.meta["u"]]  # (I, K, N)
        need = u.max(axis=1) / data.m_eff[:, None] - data.n0[:, None]
        return np.maximum(need, 0.0)
    y = x[model.meta["y"]]  # (N, J)
    return np.einsum("nij,nj->in", data.A, y)


def x_values(model: ModelInstance, x: np.ndarray) -> np.ndarray:
    """(I, N) acquisitions per resource and node."""
    return x[model.meta["x"]]


def revisions_from(model: ModelInstance, x: np.ndarray) -> RevisionVector:
    r = model.meta.get("r")
    if r is None:
        return RevisionVector(model.meta["revisions"])
    vals = x[r]
    T = vals.shape[1]
    t = np.clip(np.rint(vals @ np.arange(1, T + 1)), 1, T)
    return RevisionVector(t.astype(int))
