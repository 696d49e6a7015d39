"""Revision-time heuristics and the exact joint solve.

Each heuristic picks one revision time per resource and then solves the
fixed-revision MILP:

* ``ts_relax``  requirements from the two-stage LP; per resource, maximise the
  analytical lower bound on the saving over two-stage minus a rounding term.
* ``ms_relax``  requirements from the multi-stage LP; minimise the analytical
  upper bound on the loss against multi-stage plus the rounding term.  The
  multi-stage LP value is a lower bound.
* ``ats_relax`` solve the joint model with continuous x and binary r; its
  revision times are used directly and its value is a lower bound.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .bounds import TIE_TOL, bounds_report, rounding_residual, value_gap_intervals
from .errors import SolverFailure
from .formulations import (RevisionVector, build_adaptive_fixed, build_adaptive_joint, build_multistage,
                           build_twostage, default_x_upper, requirements, revisions_from)
from .model import ModelInstance, Solution, SolverConfig, Status, relax, solve


@dataclass(frozen=True)
class HeuristicResult:
    method: str
    revisions: RevisionVector
    objective: float
    lower_bound: float | None = None
    gap_percent: float | None = None
    guarantee: float | None = None
    wall_time: float = 0.0
    status: str = "Optimal"
    reference: float | None = None
    solution: Solution | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "method": self.method, "revisions": list(self.revisions.t_star), "objective": self.objective,
            "lower_bound": self.lower_bound, "gap_percent": self.gap_percent, "guarantee": self.guarantee,
            "wall_time": self.wall_time, "status": self.status, "reference": self.reference,
        }


def _cfg(config):
    return config or SolverConfig()


def _solve_ok(model: ModelInstance, config: SolverConfig, what: str, allow_limit=False) -> Solution:
    sol = solve(model, config)
    if sol.status == Status.OPTIMAL or (allow_limit and sol.status == Status.TIME_LIMIT and sol.has_values):
        return sol
    raise SolverFailure(f"{what}: {sol.status}")


def _gap(obj, lb):
    if lb is None or not math.isfinite(lb):
        return None
    return 100.0 * (obj - lb) / obj if obj else 0.0


def _finish(method, tree, data, revisions, config, t0, lower_bound=None, guarantee=None, reference=None):
    model = build_adaptive_fixed(tree, data, revisions)
    sol = _solve_ok(model, config, f"{method} fixed-revision solve", allow_limit=True)
    lb = None if lower_bound is None else min(lower_bound, sol.objective)
    return HeuristicResult(method, revisions, sol.objective, lb, _gap(sol.objective, lb), guarantee,
                           time.perf_counter() - t0, str(sol.status), reference, sol)


def _lp_requirements(tree, data, model, config):
    sol = _solve_ok(relax(model), config, "LP relaxation")
    return sol, requirements(tree, data, model, sol.x)


def _choose(tree, costs, delta, score):
    """Per resource: best t in 2..T of ``score(report, t, residual)`` (largest), ties to the smallest t."""
    T = tree.stage_count
    if T == 1:
        return RevisionVector([1] * costs.shape[0])
    out = []
    for i in range(costs.shape[0]):
        rep = bounds_report(tree, costs[i], delta[i])
        vals = np.array([score(rep, t, rounding_residual(tree, delta[i], t) * costs[i, 0]) for t in range(2, T + 1)])
        out.append(int(np.flatnonzero(vals >= vals.max() - TIE_TOL)[0]) + 2)
    return RevisionVector(out)


def ts_relax(tree, data, config: SolverConfig | None = None) -> HeuristicResult:
    cfg = _cfg(config)
    t0 = time.perf_counter()
    lp, delta = _lp_requirements(tree, data, build_twostage(tree, data), cfg)
    costs = data.acquisition_costs(tree)
    rv = _choose(tree, costs, delta, lambda rep, t, res: value_gap_intervals(rep, t)[0].lo - res)
    # the two-stage LP value is reported for reference only; it bounds nothing about the ATS optimum
    return _finish("TS-Relax", tree, data, rv, cfg, t0, reference=lp.objective)


def ms_relax(tree, data, config: SolverConfig | None = None) -> HeuristicResult:
    cfg = _cfg(config)
    t0 = time.perf_counter()
    lp, delta = _lp_requirements(tree, data, build_multistage(tree, data), cfg)
    costs = data.acquisition_costs(tree)
    rv = _choose(tree, costs, delta, lambda rep, t, res: -(value_gap_intervals(rep, t)[1].hi + res))
    return _finish("MS-Relax", tree, data, rv, cfg, t0, lower_bound=lp.objective)


def ats_relax(tree, data, config: SolverConfig | None = None, relax_revisions: bool = False,
              x_upper=None) -> HeuristicResult:
    """Joint model with continuous x (and continuous r when ``relax_revisions``).

    With continuous r the revision time is ``sum_t t r_it`` rounded to the
    nearest period.  The lower bound is the solver's dual bound on the
    relaxed joint model (its optimal value when solved to optimality).
    """
    cfg = _cfg(config)
    t0 = time.perf_counter()
    if x_upper is None:
        x_upper = default_x_upper(tree, data, cfg)
    model = build_adaptive_joint(tree, data, x_upper, relax_x=True, relax_r=relax_revisions)
    sol = _solve_ok(model, cfg, "relaxed joint model", allow_limit=True)
    rv = revisions_from(model, sol.x)
    delta = requirements(tree, data, model, sol.x)
    costs = data.acquisition_costs(tree)
    guarantee = sum(rounding_residual(tree, delta[i], t) * costs[i, 0] for i, t in enumerate(rv))
    return _finish("ATS-Relax", tree, data, rv, cfg, t0, lower_bound=sol.bound, guarantee=float(guarantee))


def exact_ats(tree, data, config: SolverConfig | None = None, x_upper=None) -> HeuristicResult:
    cfg = _cfg(config)
    t0 = time.perf_counter()
    model = build_adaptive_joint(tree, data, x_upper, config=cfg)
    sol = _solve_ok(model, cfg, "joint model", allow_limit=True)
    rv = revisions_from(model, sol.x)
    return HeuristicResult("ATS", rv, sol.objective, sol.bound, _gap(sol.objective, sol.bound), None,
                           time.perf_counter() - t0, str(sol.status), None, sol)


def solve_value(model: ModelInstance, config: SolverConfig | None = None, what: str = "model") -> Solution:
    return _solve_ok(model, _cfg(config), what, allow_limit=True)


METHODS = ("MS", "ATS", "TS-Relax", "MS-Relax", "ATS-Relax", "TS")


def gain_loss_table(tree, data, config: SolverConfig | None = None, methods=METHODS) -> list[dict]:
    """Objective, %Gain over two-stage, %Loss against multi-stage and %Gap per method.

    ``rvats`` on the ATS row is the relative value of adaptive two-stage.
    """
    cfg = _cfg(config)
    ms = solve_value(build_multistage(tree, data), cfg, "multi-stage")
    ts = solve_value(build_twostage(tree, data), cfg, "two-stage")
    v_ms, v_ts = ms.objective, ts.objective
    rows = []

    def row(name, obj, status, gap=None, revisions=None, wall=None, extra=None):
        r = {"method": name, "objective": obj, "status": status,
             "gain": 100.0 * (v_ts - obj) / v_ts if v_ts else 0.0,
             "loss": 100.0 * (obj - v_ms) / v_ms if v_ms else 0.0,
             "gap": gap, "revisions": None if revisions is None else list(revisions), "wall_time": wall}
        r.update(extra or {})
        rows.append(r)

    for m in methods:
        if m == "MS":
            row("MS", v_ms, str(ms.status), wall=ms.wall_time)
        elif m == "TS":
            row("TS", v_ts, str(ts.status), wall=ts.wall_time)
        else:
            fn = {"ATS": exact_ats, "TS-Relax": ts_relax, "MS-Relax": ms_relax, "ATS-Relax": ats_relax}[m]
            res = fn(tree, data, cfg)
            gap = None if m in ("ATS", "TS-Relax") else res.gap_percent
            extra = {"rvats": 100.0 * (v_ts - res.objective) / v_ts if v_ts else 0.0} if m == "ATS" else None
            row(m, res.objective, res.status, gap, res.revisions, res.wall_time, extra)
    return rows
