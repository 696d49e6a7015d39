"""Solver-agnostic LP/MILP models and solver backends.

Models are built incrementally with :class:`ModelBuilder` and frozen into an
immutable :class:`ModelInstance` (sparse row storage, minimisation).  Two
backends are bundled: ``"highs"`` wraps the HiGHS solver shipped with scipy,
``"bnb"`` is a small best-first branch and bound over HiGHS LP relaxations
that branches on the most fractional variable (lowest index on ties).
"""
from __future__ import annotations

import enum
import heapq
import math
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .errors import AdaptspError, MalformedModel, NumericalFailure

LE, EQ, GE = "<=", "=", ">="
INTEGRALITY_TOL = 1e-6


class BackendUnavailable(AdaptspError):
    pass


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    TIME_LIMIT = "TimeLimit"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ModelInstance:
    """Minimise ``c @ x + obj_constant`` subject to sparse rows and bounds.

    ``meta`` carries builder-specific index maps (for example the variable
    indices of x per resource and node) and is ignored by the solvers.
    """
    name: str
    var_names: tuple
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray
    A: sp.csr_matrix
    senses: tuple
    rhs: np.ndarray
    con_names: tuple
    c: np.ndarray
    obj_constant: float = 0.0
    meta: Mapping = field(default_factory=dict, compare=False)

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_cons(self) -> int:
        return len(self.con_names)

    @property
    def n_integer(self) -> int:
        return int(self.integer.sum())

    def var_index(self, name: str) -> int:
        idx = self.meta.get("_name_index")
        if idx is None:
            idx = {v: i for i, v in enumerate(self.var_names)}
            object.__setattr__(self, "meta", {**self.meta, "_name_index": idx})
        return idx[name]

    def validate(self):
        n = self.n_vars
        if not (len(self.lb) == len(self.ub) == len(self.integer) == len(self.c) == n):
            raise MalformedModel("variable arrays disagree in length")
        if np.any(self.lb > self.ub):
            bad = int(np.flatnonzero(self.lb > self.ub)[0])
            raise MalformedModel(f"variable {self.var_names[bad]} has lower bound above upper bound")
        if self.A.shape != (self.n_cons, n):
            raise MalformedModel(f"constraint matrix shape {self.A.shape} vs {self.n_cons}x{n}")
        if len(self.senses) != self.n_cons or len(self.rhs) != self.n_cons:
            raise MalformedModel("constraint arrays disagree in length")
        if any(s not in (LE, EQ, GE) for s in self.senses):
            raise MalformedModel("unknown constraint sense")
        if len(set(self.var_names)) != n:
            raise MalformedModel("duplicate variable names")
        return self

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        s = np.asarray(self.senses)
        lo = np.where(s == LE, -np.inf, self.rhs)
        hi = np.where(s == GE, np.inf, self.rhs)
        return lo, hi

    def objective_of(self, x) -> float:
        return float(self.c @ np.asarray(x, dtype=float) + self.obj_constant)

    def max_violation(self, x) -> float:
        x = np.asarray(x, dtype=float)
        ax = self.A @ x
        lo, hi = self.row_bounds()
        v = [np.max(np.maximum(lo - ax, 0), initial=0.0), np.max(np.maximum(ax - hi, 0), initial=0.0),
             np.max(np.maximum(self.lb - x, 0), initial=0.0), np.max(np.maximum(x - self.ub, 0), initial=0.0)]
        return float(max(v))


class ModelBuilder:
    """Incremental construction of a :class:`ModelInstance`."""

    def __init__(self, name: str = "model"):
        self.name = name
        self._names: list[str] = []
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._int: list[bool] = []
        self._c: list[float] = []
        self._rows: list[int] = []
        self._cols: list[int] = []
        self._vals: list[float] = []
        self._senses: list[str] = []
        self._rhs: list[float] = []
        self._cnames: list[str] = []
        self.obj_constant = 0.0
        self.meta: dict = {}

    @property
    def n_vars(self):
        return len(self._names)

    def add_var(self, name: str, lb: float = 0.0, ub: float = math.inf, integer: bool = False,
                obj: float = 0.0) -> int:
        self._names.append(name)
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._int.append(bool(integer))
        self._c.append(float(obj))
        return len(self._names) - 1

    def add_obj(self, j: int, coef: float):
        self._c[j] += float(coef)

    def add_constr(self, terms: Mapping[int, float] | Iterable[tuple[int, float]], sense: str,
                   rhs: float, name: str | None = None) -> int:
        if sense not in (LE, EQ, GE):
            raise MalformedModel(f"unknown sense {sense!r}")
        i = len(self._senses)
        items = terms.items() if isinstance(terms, Mapping) else terms
        n = len(self._names)
        for j, v in items:
            if not 0 <= j < n:
                raise MalformedModel(f"constraint {name or i} references missing variable {j}")
            if v != 0:
                self._rows.append(i)
                self._cols.append(int(j))
                self._vals.append(float(v))
        self._senses.append(sense)
        self._rhs.append(float(rhs))
        self._cnames.append(name or f"c{i}")
        return i

    def build(self) -> ModelInstance:
        m, n = len(self._senses), len(self._names)
        A = sp.csr_matrix((self._vals, (self._rows, self._cols)), shape=(m, n))
        A.sum_duplicates()
        return ModelInstance(
            name=self.name, var_names=tuple(self._names), lb=np.array(self._lb), ub=np.array(self._ub),
            integer=np.array(self._int, dtype=bool), A=A, senses=tuple(self._senses),
            rhs=np.array(self._rhs), con_names=tuple(self._cnames), c=np.array(self._c),
            obj_constant=float(self.obj_constant), meta=dict(self.meta),
        ).validate()

    @classmethod
    def from_model(cls, model: ModelInstance) -> "ModelBuilder":
        b = cls(model.name)
        b._names = list(model.var_names)
        b._lb = list(model.lb)
        b._ub = list(model.ub)
        b._int = list(model.integer)
        b._c = list(model.c)
        coo = model.A.tocoo()
        b._rows, b._cols, b._vals = list(coo.row), list(coo.col), list(coo.data)
        b._senses = list(model.senses)
        b._rhs = list(model.rhs)
        b._cnames = list(model.con_names)
        b.obj_constant = model.obj_constant
        b.meta = {k: v for k, v in model.meta.items() if not k.startswith("_")}
        return b


def relax(model: ModelInstance) -> ModelInstance:
    """Same model with every integrality flag cleared."""
    if not model.integer.any():
        return model
    return replace(model, integer=np.zeros(model.n_vars, dtype=bool))


@dataclass(frozen=True)
class SolverConfig:
    gap: float = 1e-3
    time_limit: float = 7200.0
    threads: int = 1
    backend: str = "highs"

    def __post_init__(self):
        if not self.gap > 0:
            raise ValueError("gap tolerance must be positive")
        if not self.time_limit > 0:
            raise ValueError("time limit must be positive")


@dataclass(frozen=True)
class Solution:
    status: Status
    objective: float
    x: np.ndarray | None
    bound: float
    gap: float
    wall_time: float
    model: ModelInstance | None = field(default=None, repr=False, compare=False)

    @property
    def has_values(self) -> bool:
        return self.x is not None

    def value(self, name: str) -> float:
        return float(self.x[self.model.var_index(name)])

    def values(self, index) -> np.ndarray:
        """Values at an integer index array (``-1`` entries give 0)."""
        index = np.asarray(index)
        out = np.where(index >= 0, self.x[np.maximum(index, 0)], 0.0)
        return out


def _rel_gap(obj, bound):
    if not (np.isfinite(obj) and np.isfinite(bound)):
        return math.inf
    return abs(obj - bound) / max(abs(obj), 1e-10)


def _solve_highs(model: ModelInstance, config: SolverConfig) -> Solution:
    t0 = time.perf_counter()
    n = model.n_vars
    cons = []
    if model.n_cons:
        lo, hi = model.row_bounds()
        cons = [LinearConstraint(model.A, lo, hi)]
    opts = {"time_limit": float(config.time_limit), "disp": False, "presolve": True}
    if model.integer.any():
        opts["mip_rel_gap"] = float(config.gap)
    if n == 0:
        return Solution(Status.OPTIMAL, model.obj_constant, np.zeros(0), model.obj_constant, 0.0, 0.0, model)
    res = milp(model.c, integrality=model.integer.astype(int), bounds=Bounds(model.lb, model.ub),
               constraints=cons, options=opts)
    wall = time.perf_counter() - t0
    k = model.obj_constant
    x = None if res.x is None else np.asarray(res.x, dtype=float)
    if res.status == 0:
        obj = float(res.fun) + k
        bound = getattr(res, "mip_dual_bound", None)
        bound = obj if bound is None or not model.integer.any() else float(bound) + k
        gap = 0.0 if not model.integer.any() else _rel_gap(obj, bound)
        return Solution(Status.OPTIMAL, obj, x, bound, gap, wall, model)
    if res.status == 1:
        if x is None:
            return Solution(Status.TIME_LIMIT, math.nan, None, -math.inf, math.inf, wall, model)
        obj = float(model.c @ x) + k
        bound = getattr(res, "mip_dual_bound", None)
        bound = -math.inf if bound is None else float(bound) + k
        return Solution(Status.TIME_LIMIT, obj, x, bound, _rel_gap(obj, bound), wall, model)
    if res.status == 2:
        return Solution(Status.INFEASIBLE, math.inf, None, math.inf, math.inf, wall, model)
    if res.status == 3:
        return Solution(Status.UNBOUNDED, -math.inf, None, -math.inf, math.inf, wall, model)
    raise NumericalFailure(f"HiGHS returned status {res.status}: {res.message}")


def _lp(model, lb, ub, time_limit):
    lo, hi = model.row_bounds() if model.n_cons else (np.zeros(0), np.zeros(0))
    A = model.A
    eq = lo == hi
    ub_rows = []
    ub_rhs = []
    fin_hi = ~eq & np.isfinite(hi)
    fin_lo = ~eq & np.isfinite(lo)
    if fin_hi.any():
        ub_rows.append(A[fin_hi])
        ub_rhs.append(hi[fin_hi])
    if fin_lo.any():
        ub_rows.append(-A[fin_lo])
        ub_rhs.append(-lo[fin_lo])
    A_ub = sp.vstack(ub_rows).tocsr() if ub_rows else None
    b_ub = np.concatenate(ub_rhs) if ub_rhs else None
    A_eq = A[eq] if eq.any() else None
    b_eq = lo[eq] if eq.any() else None
    bounds = np.column_stack([np.where(np.isfinite(lb), lb, -np.inf), np.where(np.isfinite(ub), ub, np.inf)])
    return linprog(model.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                   method="highs-ds", options={"time_limit": max(time_limit, 1e-3)})


def _solve_bnb(model: ModelInstance, config: SolverConfig) -> Solution:
    """Best-first branch and bound; LP relaxations by dual simplex."""
    t0 = time.perf_counter()
    k = model.obj_constant
    ints = np.flatnonzero(model.integer)
    best_x, best_obj = None, math.inf
    counter = 0
    root = _lp(model, model.lb, model.ub, config.time_limit)
    if root.status == 2:
        return Solution(Status.INFEASIBLE, math.inf, None, math.inf, math.inf, time.perf_counter() - t0, model)
    if root.status == 3:
        return Solution(Status.UNBOUNDED, -math.inf, None, -math.inf, math.inf, time.perf_counter() - t0, model)
    if root.status != 0:
        raise NumericalFailure(f"root LP failed: {root.message}")
    heap = [(root.fun, counter, model.lb.copy(), model.ub.copy(), root.x)]
    bound = root.fun
    timed_out = False
    while heap:
        if time.perf_counter() - t0 > config.time_limit:
            timed_out = True
            break
        node_obj, _, lb, ub, x = heapq.heappop(heap)
        bound = node_obj
        if best_x is not None and node_obj >= best_obj - config.gap * max(abs(best_obj), 1e-10):
            bound = min(node_obj, best_obj)
            heap.clear()
            break
        frac = np.abs(x[ints] - np.round(x[ints]))
        if ints.size == 0 or frac.max() <= INTEGRALITY_TOL:
            if node_obj < best_obj:
                best_obj, best_x = node_obj, x
            continue
        # most fractional: distance from nearest integer closest to 0.5; argmax picks lowest index
        j = ints[int(np.argmax(frac))]
        for side in (0, 1):
            lb2, ub2 = lb.copy(), ub.copy()
            if side == 0:
                ub2[j] = math.floor(x[j])
            else:
                lb2[j] = math.ceil(x[j])
            if lb2[j] > ub2[j]:
                continue
            res = _lp(model, lb2, ub2, config.time_limit - (time.perf_counter() - t0))
            if res.status != 0:
                continue
            if res.fun < best_obj:
                counter += 1
                heapq.heappush(heap, (res.fun, counter, lb2, ub2, res.x))
    wall = time.perf_counter() - t0
    if not heap and not timed_out:
        bound = best_obj if best_x is not None else math.inf
    if best_x is None:
        if timed_out:
            return Solution(Status.TIME_LIMIT, math.nan, None, bound + k, math.inf, wall, model)
        return Solution(Status.INFEASIBLE, math.inf, None, math.inf, math.inf, wall, model)
    x = best_x.copy()
    x[ints] = np.round(x[ints])
    obj = best_obj + k
    bnd = min(bound, best_obj) + k
    status = Status.TIME_LIMIT if timed_out else Status.OPTIMAL
    return Solution(status, obj, x, bnd, _rel_gap(obj, bnd), wall, model)


BACKENDS = {"highs": _solve_highs, "bnb": _solve_bnb}


def solve(model: ModelInstance, config: SolverConfig | None = None) -> Solution:
    config = config or SolverConfig()
    try:
        backend = BACKENDS[config.backend]
    except KeyError:
        raise BackendUnavailable(f"unknown backend {config.backend!r}; have {sorted(BACKENDS)}") from None
    return backend(model, config)
