"""Figures for reports.  Uses the Agg backend so it works headless."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
    "legend.frameon": False,
}

_POLICY_STYLE = {"static": ("k", "--"), "adaptive": ("C0", "-"), "dynamic": ("C3", ":")}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_revision_curve(rows: list[dict], path, title: str | None = None):
    """Expected cost against the revision time; static and dynamic drawn as flat references."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ts = [r["t_star"] for r in rows]
        for p, (color, ls) in _POLICY_STYLE.items():
            if p not in rows[0]:
                continue
            ys = [r[p] for r in rows]
            ax.plot(ts, ys, color=color, ls=ls, marker="o" if p == "adaptive" else None, label=p)
        ax.set_xlabel("revision time t*")
        ax.set_ylabel("expected cost")
        ax.set_xticks(ts)
        if title:
            ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def plot_rvats(rows: list[dict], path):
    """Mean relative value of adaptive two-stage per horizon, one line per (M, gamma)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for M, g in sorted({(r["M"], r["gamma"]) for r in rows}):
            pts = sorted((r["T"], r["rvats"]) for r in rows if (r["M"], r["gamma"]) == (M, g) and r["rvats"] is not None)
            if pts:
                ax.plot(*zip(*pts), marker="o", label=f"M={M}, gamma={g:g}")
        ax.set_xlabel("stages T")
        ax.set_ylabel("RVATS (%)")
        ax.legend()
        return _save(fig, path)


def plot_method_gaps(rows: list[dict], path):
    """%Gain over two-stage per method and horizon."""
    methods = [c[:-5] for c in rows[0] if c.endswith(" gain")]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for m in methods:
            pts = [(r["T"], r[f"{m} gain"]) for r in rows if r.get(f"{m} gain") is not None]
            if pts:
                ax.plot(*zip(*pts), marker=".", label=m)
        ax.set_xlabel("stages T")
        ax.set_ylabel("gain over two-stage (%)")
        ax.legend()
        return _save(fig, path)


def plot_bounds(rows: list[dict], path):
    """LP gaps with their analytical intervals per revision time."""
    with plt.rc_context(STYLE):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.6))
        ts = [r["t_star"] for r in rows]
        for ax, key, lo, hi, label in ((a1, "vT_minus_vR", "saving_lo", "saving_hi", "saving over two-stage"),
                                       (a2, "vR_minus_vM", "loss_lo", "loss_hi", "loss against multi-stage")):
            ax.fill_between(ts, [r[lo] for r in rows], [r[hi] for r in rows], alpha=0.2, label="interval")
            ax.plot(ts, [r[key] for r in rows], marker="o", label="LP")
            ax.set_xlabel("revision time t*")
            ax.set_title(label)
            ax.set_xticks(ts)
        a1.legend()
        return _save(fig, path)
