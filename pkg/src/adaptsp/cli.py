"""Command line entry point: ``adaptsp <command> ...``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .errors import AdaptspError


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _int_range(text: str) -> list[int]:
    """``"1..5"`` or ``"1,3,4"``."""
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",") if v.strip()]


def _write_rows(rows: list[dict], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


# -- tree -----------------------------------------------------------------

def cmd_tree_generate(args) -> int:
    from .tree import TreeGenConfig, generate_tree, save_tree

    lo = _floats(args.alpha_low) if args.alpha_low else None
    hi = _floats(args.alpha_high) if args.alpha_high else None
    if args.gamma is not None:
        cfg = TreeGenConfig.with_gamma(args.branches, args.stages, args.gamma, root_demand=tuple(_floats(args.root)),
                                       rng_seed=args.seed, shared_draws=args.shared_draws)
    else:
        lo = lo if lo is None or len(lo) > 1 else lo[0]
        hi = hi if hi is None or len(hi) > 1 else hi[0]
        cfg = TreeGenConfig(args.branches, args.stages, tuple(_floats(args.root)),
                            lo if lo is not None else 1.0, hi if hi is not None else 1.2,
                            rng_seed=args.seed, shared_draws=args.shared_draws)
    tree = generate_tree(cfg)
    save_tree(tree, args.output)
    print(f"wrote {tree.n_nodes} nodes, {tree.stage_count} stages to {args.output}")
    return 0


def cmd_tree_validate(args) -> int:
    from .tree import load_tree

    tree = load_tree(args.tree)
    print(f"ok: {tree.n_nodes} nodes, {tree.stage_count} stages, fields {sorted(tree.payloads)}")
    return 0


# -- models -----------------------------------------------------------------

def cmd_solve(args) -> int:
    from .lpfile import read_lp
    from .model import SolverConfig, solve

    model = read_lp(args.model)
    sol = solve(model, SolverConfig(gap=args.gap, time_limit=args.timelimit, backend=args.backend))
    out = {"status": str(sol.status), "objective": sol.objective, "bound": sol.bound, "gap": sol.gap,
           "wall_time": sol.wall_time}
    if sol.has_values and args.values:
        out["values"] = {n: float(v) for n, v in zip(model.var_names, sol.x) if abs(v) > 1e-9}
    text = json.dumps(out, indent=1, default=float)
    if args.output:
        Path(args.output).write_text(text + "\n")
    print(text)
    return 0 if sol.has_values else 1


def cmd_compile(args) -> int:
    from .formulations import (RevisionVector, build_adaptive_fixed, build_adaptive_joint, build_genexp,
                               build_multistage, build_twostage, load_problem_data)
    from .lpfile import write_lp
    from .tree import load_tree

    tree = load_tree(args.tree)
    data = load_problem_data(args.data, tree)
    f = args.formulation
    if f == "ms":
        model = build_multistage(tree, data)
    elif f == "ts":
        model = build_twostage(tree, data)
    elif f == "ats-fixed":
        if not args.revisions:
            raise AdaptspError("ats-fixed needs --revisions")
        model = build_adaptive_fixed(tree, data, RevisionVector.parse(args.revisions))
    elif f == "ats-joint":
        model = build_adaptive_joint(tree, data)
    else:
        model = build_genexp(tree, data, RevisionVector.parse(args.revisions) if args.revisions else "joint")
    write_lp(model, args.output)
    print(f"wrote {model.n_vars} variables ({model.n_integer} integer), {model.n_cons} constraints to {args.output}")
    return 0


# -- bounds / heuristics ----------------------------------------------------

def cmd_bounds(args) -> int:
    from .bounds import table_rows
    from .model import SolverConfig
    from .tree import load_tree

    tree = load_tree(args.tree)
    rows = table_rows(tree, args.a, args.delta, SolverConfig(gap=1e-9))
    # one row per quantity, one column per revision time
    layout = [("vT-vR", "vT_minus_vR"), ("vR-vM", "vR_minus_vM"), ("delta_plus", "delta_plus"),
              ("saving_lo", "saving_lo"), ("saving_hi", "saving_hi"), ("loss_lo", "loss_lo"), ("loss_hi", "loss_hi")]
    table = [{"quantity": label, **{f"t*={r['t_star']}": f"{r[key]:.6g}" for r in rows}} for label, key in layout]
    _write_rows(table, args.report)
    if not args.no_figure:
        from .plotting import plot_bounds
        plot_bounds(rows, Path(args.report).with_suffix(".png"))
    for r in table:
        print(",".join(str(v) for v in r.values()))
    return 0


def cmd_heuristic(args) -> int:
    from .formulations import load_problem_data
    from .heuristics import ats_relax, exact_ats, ms_relax, ts_relax
    from .model import SolverConfig
    from .tree import load_tree

    tree = load_tree(args.tree)
    data = load_problem_data(args.data, tree)
    fn = {"ts-relax": ts_relax, "ms-relax": ms_relax, "ats-relax": ats_relax, "exact": exact_ats}[args.method]
    res = fn(tree, data, SolverConfig(gap=args.gap, time_limit=args.timelimit))
    text = json.dumps(res.to_dict(), indent=1)
    Path(args.report).parent.mkdir(parents=True, exist_ok=True)
    Path(args.report).write_text(text + "\n")
    print(text)
    return 0


# -- newsvendor / genexp ----------------------------------------------------

def cmd_newsvendor(args) -> int:
    from .newsvendor import NewsvendorConfig, example_configs, revision_curve

    if args.config in example_configs():
        cfg = example_configs()[args.config]
    else:
        cfg = NewsvendorConfig.load(args.config)
    over = {k: v for k, v in (("scenarios", args.scenarios), ("seed", args.seed)) if v is not None}
    if over:
        cfg = NewsvendorConfig.from_dict({**cfg.to_dict(), **over})
    policies = tuple(p.strip() for p in args.policies.split(","))
    revisions = _int_range(args.revisions) if args.revisions else None
    rows = revision_curve(cfg, revisions, policies)
    _write_rows(rows, args.output)
    if not args.no_figure:
        from .plotting import plot_revision_curve
        plot_revision_curve(rows, Path(args.output).with_suffix(".png"))
    for r in rows:
        print(" ".join(f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}" for k, v in r.items()))
    return 0


def cmd_genexp_sweep(args) -> int:
    from .experiments import ExperimentPlan, run_sweep

    plan = ExperimentPlan.load(args.plan) if args.plan else ExperimentPlan().validate()
    if args.workers:
        plan.workers = args.workers
    res = run_sweep(plan, args.output, figures=not args.no_figure)
    for r in res["rvats"]:
        v = "-" if r["rvats"] is None else f"{r['rvats']:.4f}"
        print(f"M={r['M']} T={r['T']} gamma={r['gamma']:g} rvats={v}{' (lower bound)' if r['lower_bound'] else ''}")
    errors = [c for c in res["manifest"]["cells"] if c["error"]]
    for c in errors:
        print(f"cell M={c['M']} T={c['T']} gamma={c['gamma']} rep={c['rep']}: {c['error']}", file=sys.stderr)
    return 1 if errors else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adaptsp", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    tree = sub.add_parser("tree", help="generate or validate scenario trees")
    tsub = tree.add_subparsers(dest="tree_command", required=True)
    g = tsub.add_parser("generate")
    g.add_argument("--branches", type=int, required=True)
    g.add_argument("--stages", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--alpha-low", help="one value or a comma list per stage 2..T")
    g.add_argument("--alpha-high")
    g.add_argument("--gamma", type=float, help="use [1 - gamma t, 1.2 + gamma t] multipliers")
    g.add_argument("--root", default="1.0", help="comma separated root demand per subperiod")
    g.add_argument("--shared-draws", action="store_true", help="one multiplier per (stage, branch)")
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_tree_generate)
    v = tsub.add_parser("validate")
    v.add_argument("tree")
    v.set_defaults(func=cmd_tree_validate)

    s = sub.add_parser("solve", help="solve an LP-format model")
    s.add_argument("model")
    s.add_argument("--gap", type=float, default=1e-3)
    s.add_argument("--timelimit", type=float, default=7200.0)
    s.add_argument("--backend", default="highs", choices=("highs", "bnb"))
    s.add_argument("--values", action="store_true", help="include nonzero variable values")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("compile", help="write a formulation as an LP file")
    c.add_argument("--formulation", required=True, choices=("ms", "ts", "ats-fixed", "ats-joint", "genexp"))
    c.add_argument("--tree", required=True)
    c.add_argument("--data", required=True)
    c.add_argument("--revisions", help="comma separated revision time per resource")
    c.add_argument("-o", "--output", required=True)
    c.set_defaults(func=cmd_compile)

    b = sub.add_parser("bounds", help="value-of-adaptiveness table for a single resource")
    b.add_argument("--tree", required=True)
    b.add_argument("--a", default="a", help="payload field holding costs")
    b.add_argument("--delta", default="delta", help="payload field holding requirements")
    b.add_argument("--report", required=True)
    b.add_argument("--no-figure", action="store_true")
    b.set_defaults(func=cmd_bounds)

    h = sub.add_parser("heuristic", help="run a revision-time heuristic")
    h.add_argument("--method", required=True, choices=("ts-relax", "ms-relax", "ats-relax", "exact"))
    h.add_argument("--tree", required=True)
    h.add_argument("--data", required=True)
    h.add_argument("--gap", type=float, default=1e-3)
    h.add_argument("--timelimit", type=float, default=7200.0)
    h.add_argument("--report", required=True)
    h.set_defaults(func=cmd_heuristic)

    n = sub.add_parser("newsvendor", help="expected cost against the revision time")
    n.add_argument("--config", required=True, help="JSON file or one of stationary, growing_demand, growing_costs")
    n.add_argument("--policies", default="static,adaptive,dynamic")
    n.add_argument("--revisions", help="e.g. 1..5")
    n.add_argument("--scenarios", type=int)
    n.add_argument("--seed", type=int)
    n.add_argument("--no-figure", action="store_true")
    n.add_argument("-o", "--output", required=True)
    n.set_defaults(func=cmd_newsvendor)

    ge = sub.add_parser("genexp", help="generation expansion experiments")
    gsub = ge.add_subparsers(dest="genexp_command", required=True)
    sw = gsub.add_parser("sweep")
    sw.add_argument("--plan", help="plan JSON; defaults to the desk plan")
    sw.add_argument("--workers", type=int)
    sw.add_argument("--no-figure", action="store_true")
    sw.add_argument("-o", "--output", required=True)
    sw.set_defaults(func=cmd_genexp_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (AdaptspError, OSError, json.JSONDecodeError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
