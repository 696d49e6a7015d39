"""Generation expansion experiments over sampled demand trees.

A plan enumerates cells (branches M, stages T, variability gamma,
replication).  Each cell samples a tree whose stage-t demand multipliers lie
in [1 - gamma t, 1.2 + gamma t], solves the two-stage and exact adaptive
models, and (for the table gamma) every heuristic.  Replications share their
tree seed across gamma so variability levels are compared on matched draws.
"""
from __future__ import annotations

import csv
import io
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import AdaptspError, InvalidPlan
from .formulations import GenExpData, build_genexp, load_genexp_data, revisions_from
from .heuristics import METHODS, ats_relax, exact_ats, ms_relax, ts_relax
from .model import Solution, SolverConfig, Status, solve
from .tree import ScenarioTree, TreeGenConfig, generate_tree, node_count


@dataclass
class ExperimentPlan:
    branches: tuple = (2,)
    stages: tuple = (3, 4, 5, 6)
    gammas: tuple = (0.0, 0.005, 0.01)
    replications: int = 3
    seed: int = 2024
    methods: tuple = METHODS
    table_gamma: float = 0.005
    gap: float = 1e-3
    time_limit: float = 60.0
    workers: int = 1
    data: str | None = None
    min_stage: int = 3
    max_stage: int = 10

    def __post_init__(self):
        self.branches = tuple(int(m) for m in self.branches)
        self.stages = tuple(int(t) for t in self.stages)
        self.gammas = tuple(float(g) for g in self.gammas)
        self.methods = tuple(self.methods)

    def validate(self) -> "ExperimentPlan":
        if self.replications < 1:
            raise InvalidPlan("replications must be >= 1")
        if not self.branches or min(self.branches) < 1:
            raise InvalidPlan("branch counts must be >= 1")
        if not self.stages or min(self.stages) < self.min_stage or max(self.stages) > self.max_stage:
            raise InvalidPlan(f"stages must lie in [{self.min_stage}, {self.max_stage}]")
        if not self.gammas or min(self.gammas) < 0:
            raise InvalidPlan("gammas must be nonnegative")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise InvalidPlan(f"unknown methods {sorted(unknown)}")
        if self.workers < 1:
            raise InvalidPlan("workers must be >= 1")
        SolverConfig(self.gap, self.time_limit)
        return self

    def solver(self) -> SolverConfig:
        return SolverConfig(gap=self.gap, time_limit=self.time_limit)

    def cells(self) -> list[tuple]:
        return [(M, T, g, r) for M in self.branches for T in self.stages for g in self.gammas
                for r in range(self.replications)]

    def tree_seed(self, M, T, rep) -> int:
        return int(np.random.SeedSequence([self.seed, M, T, rep]).generate_state(1)[0])

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise InvalidPlan(f"unknown plan keys {sorted(extra)}")
        return cls(**d).validate()

    @classmethod
    def load(cls, path) -> "ExperimentPlan":
        return cls.from_dict(json.loads(Path(path).read_text()))

    @classmethod
    def full(cls, **kw) -> "ExperimentPlan":
        base = dict(branches=(2, 3), stages=tuple(range(3, 11)), replications=5, time_limit=7200.0)
        base.update(kw)
        return cls(**base).validate()


@dataclass
class ExpansionPlanSummary:
    revisions: list | None
    acquisitions: list = field(default_factory=list)  # dicts: node, stage, resource, units, effective_mw
    breakdown: dict = field(default_factory=dict)
    objective: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def cell_tree(plan: ExperimentPlan, data: GenExpData, M: int, T: int, gamma: float, rep: int) -> ScenarioTree:
    cfg = TreeGenConfig.with_gamma(M, T, gamma, root_demand=tuple(data.root_demand),
                                   rng_seed=plan.tree_seed(M, T, rep), field_prefix=data.demand_prefix)
    return generate_tree(cfg)


def extract_expansion_plan(solution: Solution, tree: ScenarioTree, gendata: GenExpData,
                           model=None) -> ExpansionPlanSummary:
    """Acquisitions worth reporting plus the objective split.

    Two-stage solutions list one acquisition vector per stage.  Otherwise an
    entry is listed when units are bought, or when the node sits at the
    resource's revision stage and the resource is expanded somewhere.
    """
    model = model or solution.model
    x = solution.x
    xv = np.rint(x[model.meta["x"]])  # (I, N)
    kind = model.meta.get("structure")
    revisions = None
    if kind in ("fixed", "joint"):
        revisions = list(revisions_from(model, x).t_star)
    acq = []
    names = gendata.types
    for i in range(xv.shape[0]):
        any_buy = bool(np.any(xv[i] > 0))
        for n in range(tree.n_nodes):
            t = int(tree.stages[n])
            if kind == "ts":
                report = n == tree.nodes_at(t)[0]
            else:
                report = xv[i, n] > 0 or (revisions is not None and any_buy and t == revisions[i])
            if report:
                acq.append({"node": n, "stage": t, "resource": names[i], "units": int(xv[i, n]),
                            "effective_mw": float(xv[i, n] * gendata.m_eff[i])})
    c = model.c
    xi = np.unique(model.meta["x"])
    ui = model.meta["u"].ravel()
    vi = model.meta["v"].ravel()
    breakdown = {"acquisition": float(c[xi] @ x[xi]), "generation": float(c[ui] @ x[ui]),
                 "curtailment": float(c[vi] @ x[vi])}
    return ExpansionPlanSummary(revisions, acq, breakdown, float(model.objective_of(x)))


def run_cell(plan: ExperimentPlan, M: int, T: int, gamma: float, rep: int, full: bool) -> dict:
    """Solve one cell; never raises for solver trouble (errors are recorded)."""
    data = load_genexp_data(plan.data)
    cfg = plan.solver()
    tree = cell_tree(plan, data, M, T, gamma, rep)
    out = {"M": M, "T": T, "gamma": gamma, "rep": rep, "seed": plan.tree_seed(M, T, rep), "nodes": tree.n_nodes,
           "error": None, "runtimes": {}, "methods": {}}
    try:
        ts = solve(build_genexp(tree, data, "ts"), cfg)
        out["runtimes"]["TS"] = ts.wall_time
        if not ts.has_values:
            raise AdaptspError(f"two-stage model: {ts.status}")
        out["V_TS"] = ts.objective
        ats = exact_ats(tree, data, cfg)
        out["runtimes"]["ATS"] = ats.wall_time
        timed_out = ats.status != str(Status.OPTIMAL)
        out["ATS_status"] = ats.status
        out["plan"] = extract_expansion_plan(ats.solution, tree, data).to_dict() if full else None
        need_tsr = timed_out or (full and "TS-Relax" in plan.methods)
        tsr = ts_relax(tree, data, cfg) if need_tsr else None
        if tsr is not None:
            out["runtimes"]["TS-Relax"] = tsr.wall_time
        v_ats = tsr.objective if timed_out else ats.objective
        out["V_ATS"] = v_ats
        out["rvats"] = 100.0 * (ts.objective - v_ats) / ts.objective
        out["rvats_lower_bound"] = timed_out
        if full:
            ms = solve(build_genexp(tree, data, "ms"), cfg)
            out["runtimes"]["MS"] = ms.wall_time
            res = {"MS": (ms.objective, str(ms.status), None, None),
                   "TS": (ts.objective, str(ts.status), None, None),
                   "ATS": (ats.objective, ats.status, None, ats.revisions.t_star)}
            if tsr is not None:
                res["TS-Relax"] = (tsr.objective, tsr.status, None, tsr.revisions.t_star)
            for name, fn in (("MS-Relax", ms_relax), ("ATS-Relax", ats_relax)):
                if name in plan.methods:
                    r = fn(tree, data, cfg)
                    out["runtimes"][name] = r.wall_time
                    res[name] = (r.objective, r.status, r.gap_percent, r.revisions.t_star)
            for name, (obj, status, gap, rv) in res.items():
                if name not in plan.methods:
                    continue
                ok = status == str(Status.OPTIMAL) and ms.status == Status.OPTIMAL
                out["methods"][name] = {
                    "objective": obj, "status": status,
                    "gain": 100.0 * (ts.objective - obj) / ts.objective if ok else None,
                    "loss": 100.0 * (obj - ms.objective) / ms.objective if ok else None,
                    "gap": gap if ok else None, "revisions": list(rv) if rv else None,
                }
    except AdaptspError as e:
        out["error"] = f"{type(e).__name__}: {e}"
    return out


def _run_cell_args(args):
    return run_cell(*args)


def run_cells(plan: ExperimentPlan, table: bool = True) -> list[dict]:
    plan.validate()
    jobs = [(plan, M, T, g, r, table and math.isclose(g, plan.table_gamma)) for (M, T, g, r) in plan.cells()]
    if plan.workers > 1:
        with ProcessPoolExecutor(plan.workers) as ex:
            results = list(ex.map(_run_cell_args, jobs))
    else:
        results = [run_cell(*j) for j in jobs]
    return sorted(results, key=lambda r: (r["M"], r["T"], r["gamma"], r["rep"]))


def rvats_rows(cells: list[dict]) -> tuple[list[dict], list[dict]]:
    """(per replication rows, per cell means)."""
    runs = [{"M": c["M"], "T": c["T"], "gamma": c["gamma"], "rep": c["rep"], "seed": c["seed"],
             "V_TS": c.get("V_TS"), "V_ATS": c.get("V_ATS"), "rvats": c.get("rvats"),
             "lower_bound": c.get("rvats_lower_bound"), "error": c["error"]} for c in cells]
    means = []
    keys = sorted({(r["M"], r["T"], r["gamma"]) for r in runs})
    for M, T, g in keys:
        grp = [r for r in runs if (r["M"], r["T"], r["gamma"]) == (M, T, g) and r["rvats"] is not None]
        means.append({"M": M, "T": T, "gamma": g, "replications": len(grp),
                      "rvats": float(np.mean([r["rvats"] for r in grp])) if grp else None,
                      "lower_bound": any(r["lower_bound"] for r in grp)})
    return runs, means


def run_rvats_sweep(plan: ExperimentPlan, cells: list[dict] | None = None) -> list[dict]:
    """Mean relative value of adaptive two-stage per (M, T, gamma)."""
    cells = run_cells(plan, table=False) if cells is None else cells
    return rvats_rows(cells)[1]


TABLE_COLUMNS = [("MS", "gain"), ("ATS", "gain"), ("ATS", "loss"), ("TS-Relax", "gain"), ("TS-Relax", "loss"),
                 ("MS-Relax", "gain"), ("MS-Relax", "loss"), ("MS-Relax", "gap"), ("ATS-Relax", "gain"),
                 ("ATS-Relax", "loss"), ("ATS-Relax", "gap"), ("TS", "loss")]


def method_rows(cells: list[dict]) -> tuple[list[dict], list[dict]]:
    """(per replication rows, per (M, T) means); None marks a dash."""
    full = [c for c in cells if c["methods"]]
    runs = []
    for c in full:
        row = {"M": c["M"], "T": c["T"], "rep": c["rep"]}
        for m, k in TABLE_COLUMNS:
            row[f"{m} {k}"] = c["methods"].get(m, {}).get(k)
        runs.append(row)
    means = []
    for M, T in sorted({(r["M"], r["T"]) for r in runs}):
        grp = [r for r in runs if (r["M"], r["T"]) == (M, T)]
        row = {"M": M, "T": T}
        for m, k in TABLE_COLUMNS:
            vals = [r[f"{m} {k}"] for r in grp]
            row[f"{m} {k}"] = None if any(v is None for v in vals) else float(np.mean(vals))
        means.append(row)
    return runs, means


def run_method_table(plan: ExperimentPlan, cells: list[dict] | None = None) -> list[dict]:
    if cells is None:
        sub = ExperimentPlan(**{**plan.to_dict(), "gammas": [plan.table_gamma]})
        cells = run_cells(sub, table=True)
    return method_rows(cells)[1]


def ordering_violations(rows: list[dict], tol: float) -> list[str]:
    """Rows breaking MS gain >= ATS gain >= heuristic gain >= 0 by more than ``tol`` points."""
    bad = []
    for r in rows:
        ms, ats = r.get("MS gain"), r.get("ATS gain")
        tag = f"M={r['M']} T={r['T']}" + (f" rep={r['rep']}" if "rep" in r else "")
        if ms is not None and ats is not None and ms < ats - tol:
            bad.append(f"{tag}: MS gain {ms:.4f} < ATS gain {ats:.4f}")
        for h in ("TS-Relax", "MS-Relax", "ATS-Relax"):
            g = r.get(f"{h} gain")
            if g is None:
                continue
            if ats is not None and ats < g - tol:
                bad.append(f"{tag}: ATS gain {ats:.4f} < {h} gain {g:.4f}")
            if g < -tol:
                bad.append(f"{tag}: {h} gain {g:.4f} < 0")
    return bad


def trend_checks(cells: list[dict]) -> list[dict]:
    """Matched-seed comparisons: high vs zero variability, three vs two branches."""
    by = {(c["M"], c["T"], c["gamma"], c["rep"]): c.get("rvats") for c in cells}
    out = []
    gammas = sorted({k[2] for k in by})
    if len(gammas) >= 2:
        lo, hi = gammas[0], gammas[-1]
        for (M, T, g, r), v in sorted(by.items()):
            if g == hi and by.get((M, T, lo, r)) is not None and v is not None:
                out.append({"check": f"rvats(gamma={hi}) >= rvats(gamma={lo})", "M": M, "T": T, "rep": r,
                            "lhs": v, "rhs": by[(M, T, lo, r)], "holds": v >= by[(M, T, lo, r)] - 1e-9})
    for (M, T, g, r), v in sorted(by.items()):
        if M == 3 and by.get((2, T, g, r)) is not None and v is not None:
            out.append({"check": "rvats(M=3) >= rvats(M=2)", "M": M, "T": T, "rep": r, "lhs": v,
                        "rhs": by[(2, T, g, r)], "holds": v >= by[(2, T, g, r)] - 1e-9})
    return out


def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def write_csv(rows: list[dict], path) -> None:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})
    Path(path).write_text(buf.getvalue())


def run_sweep(plan: ExperimentPlan, out_dir, figures: bool = True) -> dict:
    """Run every cell and write CSVs, expansion plans, figures and a manifest into ``out_dir``."""
    import numpy
    import scipy

    out = Path(out_dir)
    (out / "plans").mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    cells = run_cells(plan, table=True)
    r_runs, r_means = rvats_rows(cells)
    m_runs, m_means = method_rows(cells)
    write_csv(r_runs, out / "rvats_runs.csv")
    write_csv(r_means, out / "rvats.csv")
    write_csv(m_runs, out / "methods_runs.csv")
    write_csv(m_means, out / "methods.csv")
    write_csv(trend_checks(cells), out / "trends.csv")
    runtimes = [{"M": c["M"], "T": c["T"], "gamma": c["gamma"], "rep": c["rep"], "method": k, "seconds": v}
                for c in cells for k, v in c["runtimes"].items()]
    write_csv(runtimes, out / "runtimes.csv")
    for c in cells:
        if c.get("plan"):
            name = f"M{c['M']}_T{c['T']}_rep{c['rep']}.json"
            (out / "plans" / name).write_text(json.dumps(c["plan"], indent=1) + "\n")
    if figures:
        from .plotting import plot_method_gaps, plot_rvats
        plot_rvats(r_means, out / "rvats.png")
        if m_means:
            plot_method_gaps(m_means, out / "methods.png")
    manifest = {
        "plan": plan.to_dict(),
        "cells": [{"M": c["M"], "T": c["T"], "gamma": c["gamma"], "rep": c["rep"], "seed": c["seed"],
                   "nodes": c["nodes"], "error": c["error"]} for c in cells],
        "solver": {"backend": "highs", "gap": plan.gap, "time_limit": plan.time_limit},
        "versions": {"adaptsp": __version__, "numpy": numpy.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "ordering_violations": ordering_violations(m_means, 100.0 * plan.gap),
        "wall_seconds": time.perf_counter() - t0,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return {"cells": cells, "rvats": r_means, "rvats_runs": r_runs, "methods": m_means, "methods_runs": m_runs,
            "manifest": manifest}


def tree_size_endpoints() -> tuple[int, int]:
    return node_count(2, 3), node_count(3, 10)
