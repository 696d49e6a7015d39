"""Multi-period newsvendor with a single revision point.

Orders for periods before the revision time ``t*`` are fixed up front as
cumulative order-up-to targets on the demand convolution.  At ``t*`` the net
inventory ``s`` is observed and the remaining cumulative targets are
shifted by ``-s``.  ``t* = 1`` is the static schedule; the dynamic baseline
re-targets every period.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import InvalidConfig, InvalidCosts, UnsupportedDistribution

EMPIRICAL_DRAWS = 1_000_000
FAMILIES = ("normal", "gamma", "uniform", "lognormal")


@dataclass
class NewsvendorConfig:
    """Costs and demand per period (1..T); ``demand_std`` is the standard deviation."""
    order_cost: Sequence[float]
    holding_cost: Sequence[float]
    backorder_cost: Sequence[float]
    demand_mean: Sequence[float]
    demand_std: Sequence[float]
    family: str = "normal"
    revision: int = 1
    scenarios: int = 1000
    seed: int = 0
    truncate: bool = False

    def __post_init__(self):
        for k in ("order_cost", "holding_cost", "backorder_cost", "demand_mean", "demand_std"):
            setattr(self, k, np.asarray(getattr(self, k), dtype=float))

    @property
    def horizon(self) -> int:
        return len(self.order_cost)

    def validate(self) -> "NewsvendorConfig":
        T = self.horizon
        for k in ("holding_cost", "backorder_cost", "demand_mean", "demand_std"):
            if len(getattr(self, k)) != T:
                raise InvalidConfig(f"{k} needs {T} entries")
        if np.any(self.demand_std < 0):
            raise InvalidConfig("demand_std must be nonnegative")
        if self.family not in FAMILIES:
            raise UnsupportedDistribution(f"family {self.family!r}; supported: {FAMILIES}")
        if self.family != "normal" and np.any(self.demand_mean <= 0):
            raise UnsupportedDistribution(f"{self.family} demand needs positive means")
        c, h, b = self.order_cost, self.holding_cost, self.backorder_cost
        for t in range(T - 1):
            if not c[t] - b[t] - 1e-12 <= c[t + 1] <= c[t] + h[t] + 1e-12:
                raise InvalidCosts(f"period {t + 1}: need c_t - b_t <= c_t+1 <= c_t + h_t")
        if b[-1] < c[-1]:
            raise InvalidCosts("final backorder cost must be at least the final order cost")
        if not 1 <= self.revision <= T:
            raise InvalidConfig(f"revision {self.revision} outside 1..{T}")
        if self.scenarios < 1:
            raise InvalidConfig("scenarios must be positive")
        return self

    def fractiles(self) -> np.ndarray:
        c = np.append(self.order_cost, 0.0)
        h, b = self.holding_cost, self.backorder_cost
        return (-c[:-1] + c[1:] + b) / (h + b)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: v.tolist() if isinstance(v, np.ndarray) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "NewsvendorConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise InvalidConfig(f"unknown newsvendor config keys {sorted(extra)}")
        return cls(**d).validate()

    @classmethod
    def load(cls, path) -> "NewsvendorConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


class DemandModel:
    """Per-period demand distributions and quantiles of partial sums D_{i..j}."""

    def __init__(self, config: NewsvendorConfig):
        self.config = config
        mu, sd = config.demand_mean, config.demand_std
        self.periods = [_frozen_dist(config.family, m, s) for m, s in zip(mu, sd)]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        cfg = self.config
        if cfg.family == "normal":
            d = rng.normal(cfg.demand_mean, cfg.demand_std, size=(n, cfg.horizon))
        else:
            d = np.column_stack([dist.rvs(size=n, random_state=rng) for dist in self.periods])
        return np.maximum(d, 0.0) if cfg.truncate else d

    @cached_property
    def _empirical(self) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence([self.config.seed, 0x5EED]))
        return np.cumsum(self.sample(EMPIRICAL_DRAWS, rng), axis=1)

    def quantile(self, i: int, j: int, q: float) -> float:
        """Quantile of D_i + ... + D_j (1-based, inclusive)."""
        cfg = self.config
        if cfg.family == "normal" and not cfg.truncate:
            m = cfg.demand_mean[i - 1:j].sum()
            s = float(np.sqrt((cfg.demand_std[i - 1:j] ** 2).sum()))
            if s == 0:
                return float(m)
            return float(stats.norm.ppf(q, m, s))
        cs = self._empirical
        tot = cs[:, j - 1] - (cs[:, i - 2] if i > 1 else 0.0)
        return float(np.quantile(tot, q))


def _frozen_dist(family, mean, sd):
    if sd == 0:
        return stats.uniform(loc=mean, scale=0.0)
    if family == "normal":
        return stats.norm(mean, sd)
    if family == "gamma":
        return stats.gamma((mean / sd) ** 2, scale=sd ** 2 / mean)
    if family == "uniform":
        w = np.sqrt(12.0) * sd
        return stats.uniform(loc=mean - w / 2, scale=w)
    if family == "lognormal":
        s2 = np.log1p((sd / mean) ** 2)
        return stats.lognorm(np.sqrt(s2), scale=mean * np.exp(-s2 / 2))
    raise UnsupportedDistribution(family)


@dataclass(frozen=True)
class PolicyTable:
    revision: int
    fractiles: np.ndarray
    pre_targets: np.ndarray  # X_{1,t}, t = 1..t*-1
    post_quantiles: np.ndarray  # F^{-1}_{t*,t}(fractile_t), t = t*..T

    @property
    def horizon(self) -> int:
        return len(self.fractiles)

    def post_targets(self, s) -> np.ndarray:
        """Cumulative post-revision targets X_{t*,t} given net inventory ``s`` (scalar or per scenario)."""
        s = np.asarray(s, dtype=float)
        return self.post_quantiles - s[..., None]


def solve_policy(config: NewsvendorConfig, revision: int | None = None,
                 demand: DemandModel | None = None) -> PolicyTable:
    config.validate()
    ts = config.revision if revision is None else int(revision)
    T = config.horizon
    if not 1 <= ts <= T:
        raise InvalidConfig(f"revision {ts} outside 1..{T}")
    dm = demand or DemandModel(config)
    fr = config.fractiles()
    pre = np.array([dm.quantile(1, t, fr[t - 1]) for t in range(1, ts)])
    post = np.array([dm.quantile(ts, t, fr[t - 1]) for t in range(ts, T + 1)])
    return PolicyTable(ts, fr, pre, post)


def _post_orders(targets: np.ndarray) -> np.ndarray:
    """x_t* = max(X_t*, 0); x_t = max(X_t - orders so far since t*, 0)."""
    out = np.zeros_like(targets)
    placed = np.zeros(targets.shape[:-1])
    for k in range(targets.shape[-1]):
        out[..., k] = np.maximum(targets[..., k] - placed, 0.0)
        placed = placed + out[..., k]
    return out


def order_quantities(policy: PolicyTable, observed_demands) -> np.ndarray:
    """Orders for every period given demand paths (only periods before t* are read).

    ``observed_demands`` has shape (T,) or (N, T); the result has the same shape.
    """
    d = np.asarray(observed_demands, dtype=float)
    single = d.ndim == 1
    d = np.atleast_2d(d)
    N, T = d.shape
    ts = policy.revision
    x = np.zeros((N, T))
    prev = 0.0
    for t in range(1, ts):
        x[:, t - 1] = max(policy.pre_targets[t - 1] - prev, 0.0)
        prev = policy.pre_targets[t - 1]
    s = x[:, :ts - 1].sum(axis=1) - d[:, :ts - 1].sum(axis=1)
    x[:, ts - 1:] = _post_orders(policy.post_targets(s))
    return x[0] if single else x


def period_costs(config: NewsvendorConfig, orders: np.ndarray, demands: np.ndarray, s0=0.0) -> np.ndarray:
    """Per-scenario cost sum_t c x + h (I)^+ + b (-I)^+ with I_t = s0 + cumulative (x - d)."""
    T = orders.shape[-1]
    c, h, b = (np.asarray(v)[-T:] for v in (config.order_cost, config.holding_cost, config.backorder_cost))
    inv = np.asarray(s0, dtype=float)[..., None] + np.cumsum(orders - demands, axis=-1)
    return (orders * c + h * np.maximum(inv, 0.0) + b * np.maximum(-inv, 0.0)).sum(axis=-1)


def dynamic_orders(config: NewsvendorConfig, demands: np.ndarray, demand: DemandModel | None = None) -> np.ndarray:
    """Period-by-period base stock: raise net inventory to F^{-1}_{t,t}(fractile_t)."""
    dm = demand or DemandModel(config)
    fr = config.fractiles()
    levels = np.array([dm.quantile(t, t, fr[t - 1]) for t in range(1, config.horizon + 1)])
    d = np.atleast_2d(demands)
    x = np.zeros_like(d)
    inv = np.zeros(d.shape[0])
    for t in range(d.shape[1]):
        x[:, t] = np.maximum(levels[t] - inv, 0.0)
        inv = inv + x[:, t] - d[:, t]
    return x


@dataclass(frozen=True)
class SimulationResult:
    policy: str
    revision: int | None
    mean: float
    stderr: float
    costs: np.ndarray = field(repr=False)


def demand_paths(config: NewsvendorConfig, scenarios: int | None = None, seed: int | None = None) -> np.ndarray:
    """Common random numbers: scenario i is row i of one seeded draw."""
    n = config.scenarios if scenarios is None else scenarios
    rng = np.random.default_rng(config.seed if seed is None else seed)
    return DemandModel(config).sample(n, rng)


def simulate(config: NewsvendorConfig, policy_kind: str = "adaptive", revision: int | None = None,
             demands: np.ndarray | None = None) -> SimulationResult:
    """Monte Carlo expected cost of ``static``, ``adaptive`` (at ``revision``) or ``dynamic``."""
    config.validate()
    d = demand_paths(config) if demands is None else np.asarray(demands, dtype=float)
    dm = DemandModel(config)
    if policy_kind == "static":
        ts = 1
        x = order_quantities(solve_policy(config, 1, dm), d)
    elif policy_kind == "adaptive":
        ts = config.revision if revision is None else revision
        x = order_quantities(solve_policy(config, ts, dm), d)
    elif policy_kind == "dynamic":
        ts = None
        x = dynamic_orders(config, d, dm)
    else:
        raise InvalidConfig(f"unknown policy {policy_kind!r}")
    costs = period_costs(config, x, d)
    se = float(costs.std(ddof=1) / np.sqrt(len(costs))) if len(costs) > 1 else 0.0
    return SimulationResult(policy_kind, ts, float(costs.mean()), se, costs)


def revision_curve(config: NewsvendorConfig, revisions: Sequence[int] | None = None,
                   policies=("static", "adaptive", "dynamic"), demands=None) -> list[dict]:
    """Expected cost of each policy per revision time, on one common demand sample."""
    config.validate()
    d = demand_paths(config) if demands is None else demands
    revisions = range(1, config.horizon + 1) if revisions is None else revisions
    fixed = {p: simulate(config, p, demands=d) for p in policies if p != "adaptive"}
    rows = []
    for t in revisions:
        row = {"t_star": int(t)}
        for p in policies:
            res = simulate(config, "adaptive", t, d) if p == "adaptive" else fixed[p]
            row[p] = res.mean
            row[f"{p}_se"] = res.stderr
        rows.append(row)
    return rows


def cost_with_pre_orders(config: NewsvendorConfig, revision: int, pre_orders, demands) -> float:
    """Sample-average cost when periods before ``revision`` order ``pre_orders`` and the rest follow the rule."""
    dm = DemandModel(config)
    pol = solve_policy(config, revision, dm)
    d = np.atleast_2d(demands)
    x = np.zeros_like(d)
    x[:, :revision - 1] = np.asarray(pre_orders, dtype=float)
    s = x[:, :revision - 1].sum(axis=1) - d[:, :revision - 1].sum(axis=1)
    x[:, revision - 1:] = _post_orders(pol.post_targets(s))
    return float(period_costs(config, x, d).mean())


def post_revision_cost(config: NewsvendorConfig, revision: int, s: float, demands) -> float:
    """Sample-average cost of periods revision..T starting from net inventory ``s``."""
    pol = solve_policy(config, revision)
    d = np.atleast_2d(demands)[:, revision - 1:]
    x = _post_orders(pol.post_targets(np.full(d.shape[0], float(s))))
    return float(period_costs(config, x, d, s0=np.full(d.shape[0], float(s))).mean())


def example_configs(scenarios: int = 1000, seed: int = 0) -> dict[str, NewsvendorConfig]:
    """The three five-period settings: stationary, growing demand, growing costs.

    Demand standard deviation is 4.  Growing demand has mean 10 + 2(t-1);
    growing costs use c_t = 4 + t, h_t = 1 + t for t = 1..5 with b_t = h_t
    before the last period and b_5 = c_5 + 1.
    """
    T = 5
    t = np.arange(1, T + 1)
    flat = dict(order_cost=[5.0] * T, holding_cost=[2.0] * T, backorder_cost=[2.0] * 4 + [6.0],
                demand_mean=[10.0] * T, demand_std=[4.0] * T, scenarios=scenarios, seed=seed)
    grow = dict(flat, demand_mean=list(10.0 + 2.0 * (t - 1)))
    c = 4.0 + t
    h = 1.0 + t
    costs = dict(flat, order_cost=list(c), holding_cost=list(h), backorder_cost=list(h[:4]) + [c[4] + 1.0])
    return {k: NewsvendorConfig(**v).validate() for k, v in
            (("stationary", flat), ("growing_demand", grow), ("growing_costs", costs))}
