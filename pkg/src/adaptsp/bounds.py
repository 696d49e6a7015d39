"""Analytical bounds on the value of adapting at a revision time.

For a single-resource coverage problem with costs ``a`` and requirements
``delta`` on a scenario tree, the quantities below bracket

* ``v^T - v^R(t)``: the saving of revising at ``t`` over the two-stage policy;
* ``v^R(t) - v^M``: the loss of revising at ``t`` against full adaptivity;

using only cost extrema and demand maxima, no LP solves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np

from .errors import SolverFailure
from .formulations import (GenExpData, RevisionVector, build_multistage, build_twostage, requirements,
                           single_resource_value)
from .model import SolverConfig, Status, relax, solve
from .tree import ScenarioTree, condense

TIE_TOL = 1e-6
CEIL_TOL = 1e-7


@dataclass(frozen=True)
class RevisionStats:
    t: int
    a_minus_lo: float
    a_minus_hi: float
    a_plus_lo: float
    a_plus_hi: float
    delta_minus: float
    delta_plus: float


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __contains__(self, v) -> bool:
        return self.lo - TIE_TOL <= v <= self.hi + TIE_TOL


@dataclass(frozen=True)
class BoundsReport:
    a_star: float
    a_sup: float
    delta_star: float
    delta_bar: float
    per_t: tuple  # RevisionStats for t = 1..T

    @property
    def stage_count(self) -> int:
        return len(self.per_t)

    def at(self, t: int) -> RevisionStats:
        return self.per_t[t - 1]

    def delta_plus(self) -> np.ndarray:
        return np.array([s.delta_plus for s in self.per_t])

    def intervals(self, t: int) -> tuple[Interval, Interval]:
        return value_gap_intervals(self, t)


def compute_tree_stats(tree: ScenarioTree, a_field="a", delta_field="delta") -> tuple[float, float, float, float]:
    """(a_*, a^*, delta^*, delta-bar): cost extrema, peak demand, expected path-maximum demand."""
    a = tree.values(a_field)
    delta = tree.values(delta_field)
    leaves = tree.leaves
    delta_bar = float(tree.probabilities[leaves] @ tree.path_max(delta)[leaves])
    return float(a.min()), float(a.max()), float(delta.max()), delta_bar


def _stage_extrema(tree, v):
    T = tree.stage_count
    lo = np.array([v[tree.nodes_at(t)].min() for t in range(1, T + 1)])
    hi = np.array([v[tree.nodes_at(t)].max() for t in range(1, T + 1)])
    return lo, hi


def _revision_stats(tree, a, delta, submax, a_lo, a_hi, d_hi, t) -> RevisionStats:
    T = tree.stage_count
    plus_lo, plus_hi = a_lo[t - 1:].min(), a_hi[t - 1:].max()
    if t == 1:
        # empty prefix: the prefix terms vanish, so any value works; reuse the suffix extrema
        minus_lo, minus_hi = plus_lo, plus_hi
        d_minus, prefix = 0.0, -math.inf
    else:
        minus_lo, minus_hi = a_lo[:t - 1].min(), a_hi[:t - 1].max()
        d_minus = prefix = float(d_hi[:t - 1].max())
    nodes = tree.nodes_at(t)
    d_plus = float(tree.probabilities[nodes] @ np.maximum(prefix, submax[nodes]))
    return RevisionStats(t, float(minus_lo), float(minus_hi), float(plus_lo), float(plus_hi), d_minus, d_plus)


def compute_revision_stats(tree: ScenarioTree, a_field="a", delta_field="delta", t: int = 2) -> RevisionStats:
    """Cost extrema before/after ``t`` and the prefix (delta^-) and expected prefix-plus-subtree (delta^+) maxima."""
    from .errors import InvalidRange
    if not 1 <= t <= tree.stage_count:
        raise InvalidRange(f"revision time {t} outside 1..{tree.stage_count}")
    a = tree.values(a_field)
    delta = tree.values(delta_field)
    a_lo, a_hi = _stage_extrema(tree, a)
    _, d_hi = _stage_extrema(tree, delta)
    return _revision_stats(tree, a, delta, tree.subtree_max(delta), a_lo, a_hi, d_hi, t)


def bounds_report(tree: ScenarioTree, a_field="a", delta_field="delta") -> BoundsReport:
    a = tree.values(a_field)
    delta = tree.values(delta_field)
    a_lo, a_hi = _stage_extrema(tree, a)
    _, d_hi = _stage_extrema(tree, delta)
    submax = tree.subtree_max(delta)
    per_t = tuple(_revision_stats(tree, a, delta, submax, a_lo, a_hi, d_hi, t)
                  for t in range(1, tree.stage_count + 1))
    return BoundsReport(*compute_tree_stats(tree, a, delta), per_t)


def value_gap_intervals(report: BoundsReport, t: int) -> tuple[Interval, Interval]:
    """Intervals containing ``v^T - v^R(t)`` and ``v^R(t) - v^M``."""
    s = report.at(t)
    a_lo, a_hi, dstar, dbar = report.a_star, report.a_sup, report.delta_star, report.delta_bar
    saving = Interval(
        a_lo * dstar - (s.a_minus_hi - s.a_plus_hi) * s.delta_minus - s.a_plus_hi * s.delta_plus,
        a_hi * dstar - (s.a_minus_lo - s.a_plus_lo) * s.delta_minus - s.a_plus_lo * s.delta_plus,
    )
    loss = Interval(
        (s.a_minus_lo - s.a_plus_lo) * s.delta_minus + s.a_plus_lo * s.delta_plus - a_hi * dbar,
        (s.a_minus_hi - s.a_plus_hi) * s.delta_minus + s.a_plus_hi * s.delta_plus - a_lo * dbar,
    )
    return saving, loss


def _argmin_from_two(values: Sequence[float]) -> int:
    """Smallest t in 2..T attaining the minimum of values[t-1] (within TIE_TOL)."""
    T = len(values)
    if T == 1:
        return 1
    v = np.asarray(values[1:], dtype=float)
    return int(np.flatnonzero(v <= v.min() + TIE_TOL)[0]) + 2


def select_t_db(tree: ScenarioTree, delta_field="delta") -> int:
    """Revision time minimising the expected prefix-plus-subtree maximum demand."""
    rep = bounds_report(tree, np.ones(tree.n_nodes), delta_field)
    return _argmin_from_two(rep.delta_plus())


def select_t_cb(tree: ScenarioTree, a_field="a") -> int:
    """Revision time minimising the largest pre-revision cost."""
    rep = bounds_report(tree, a_field, np.zeros(tree.n_nodes))
    return _argmin_from_two([s.a_minus_hi for s in rep.per_t])


def rounding_residual(tree: ScenarioTree, delta, t_star: int) -> float:
    """max over the condensed tree of ceil(delta_hat) - delta_hat."""
    ct = condense(tree, t_star, np.zeros(tree.n_nodes), delta)
    r = np.ceil(ct.delta_hat - CEIL_TOL) - ct.delta_hat
    return float(max(0.0, r.max()))


def capex_gap_bounds(tree: ScenarioTree, data, revisions, which: str = "vs_two_stage",
                     config: SolverConfig | None = None) -> float:
    """Certified bound on the value of the given revision times.

    ``vs_two_stage``: lower bound on V^TS - V^ATS(t*).
    ``vs_multi_stage``: upper bound on V^ATS(t*) - V^MS.
    Both decompose per resource using requirements taken from the LP
    relaxation of the two-stage (resp. multi-stage) model.
    """
    cfg = config or SolverConfig(gap=1e-9)
    rv = revisions if isinstance(revisions, RevisionVector) else RevisionVector(revisions)
    rv.validate(tree.stage_count, data.n_resources)
    if which == "vs_two_stage":
        model = relax(build_twostage(tree, data))
    elif which == "vs_multi_stage":
        model = relax(build_multistage(tree, data))
    else:
        raise ValueError("which must be vs_two_stage or vs_multi_stage")
    sol = solve(model, cfg)
    if sol.status != Status.OPTIMAL:
        raise SolverFailure(f"LP relaxation: {sol.status}")
    delta = requirements(tree, data, model, sol.x)
    costs = data.acquisition_costs(tree)
    total = 0.0
    for i, t in enumerate(rv):
        resid = rounding_residual(tree, delta[i], t) * costs[i, 0]
        v_r = single_resource_value(tree, costs[i], delta[i], "adaptive", t, config=cfg)
        if which == "vs_two_stage":
            v_t = single_resource_value(tree, costs[i], delta[i], "two", config=cfg)
            total += v_t - v_r - resid
        else:
            v_m = single_resource_value(tree, costs[i], delta[i], "multi", config=cfg)
            total += v_r - v_m + resid
    return total


def table_rows(tree: ScenarioTree, a_field="a", delta_field="delta", config: SolverConfig | None = None) -> list[dict]:
    """Per revision time: LP-computed gaps, delta^+ and the analytical intervals."""
    cfg = config or SolverConfig(gap=1e-9)
    a = tree.values(a_field)
    delta = tree.values(delta_field)
    rep = bounds_report(tree, a, delta)
    v_t = single_resource_value(tree, a, delta, "two", config=cfg)
    v_m = single_resource_value(tree, a, delta, "multi", config=cfg)
    rows = []
    for t in range(1, tree.stage_count + 1):
        v_r = single_resource_value(tree, a, delta, "adaptive", t, config=cfg)
        sav, loss = value_gap_intervals(rep, t)
        s = rep.at(t)
        rows.append({
            "t_star": t, "vT_minus_vR": v_t - v_r, "vR_minus_vM": v_r - v_m, "delta_plus": s.delta_plus,
            "saving_lo": sav.lo, "saving_hi": sav.hi, "loss_lo": loss.lo, "loss_hi": loss.hi,
            **{k: v for k, v in asdict(s).items() if k not in ("t", "delta_plus")},
        })
    return rows
