"""Figure rendering for the CLI report paths.

All figures are written to files (Agg backend); nothing is shown
interactively.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .parsched import STRATEGIES, CostEstimate, all_strategy_costs, memory_required
from .simulate import CommStats

plt.rcParams["figure.dpi"] = 150
plt.rcParams["axes.grid"] = True
plt.rcParams["grid.alpha"] = 0.3

_COLORS = {"2D": "#888888", "2.5D": "#5588cc", "recursive": "#cc8855", "COSMA": "#33aa55"}


def save_strategy_bar(costs: list[CostEstimate], path, title: str = "") -> None:
    """Bar chart of modeled per-rank words for each strategy."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    names = [c.strategy for c in costs]
    values = [c.q for c in costs]
    ax.bar(names, values, color=[_COLORS.get(nm, "#444444") for nm in names])
    ax.set_ylabel("words per rank")
    if title:
        ax.set_title(title, fontsize=9)
    for idx, val in enumerate(values):
        ax.annotate(f"{val:,.0f}", (idx, val), ha="center", va="bottom", fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_cost_sweep(m: int, n: int, k: int, S: int, p_center: int, path) -> None:
    """Per-strategy words vs. rank count, swept around the requested p."""
    p_lo = max(1, p_center // 8)
    p_hi = max(p_center * 8, p_lo + 1)
    ps = sorted({max(p, math_ceil_div(memory_required(m, n, k), S)) for p in _log_ints(p_lo, p_hi, 25)})
    fig, ax = plt.subplots(figsize=(5, 3.2))
    for name in STRATEGIES:
        qs = []
        for p in ps:
            cost = next(c for c in all_strategy_costs(m, n, k, p, S) if c.strategy == name)
            qs.append(cost.q)
        ax.plot(ps, qs, label=name, color=_COLORS.get(name, "#444444"), lw=1.4)
    ax.axvline(p_center, color="black", lw=0.8, ls="--", alpha=0.6)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("ranks p")
    ax.set_ylabel("words per rank")
    ax.set_title(f"m={m} n={n} k={k} S={S}", fontsize=9)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_comm_profile(stats: CommStats, path) -> None:
    """Per-rank communication from a simulated run."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    comm = stats.comm_per_rank
    ax.bar(range(len(comm)), comm, color="#33aa55", width=0.9)
    ax.axhline(stats.max_per_rank, color="black", lw=0.8, ls="--", alpha=0.6)
    ax.set_xlabel("rank")
    ax.set_ylabel("words (received + reduced)")
    ax.set_title(f"grid {stats.grid}, {stats.rounds[0] if stats.rounds else 0} rounds", fontsize=9)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def math_ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _log_ints(lo: int, hi: int, count: int) -> list[int]:
    import math

    if lo >= hi:
        return [lo]
    vals = set()
    for idx in range(count):
        frac = idx / (count - 1)
        vals.add(round(math.exp(math.log(lo) + frac * (math.log(hi) - math.log(lo)))))
    return sorted(vals)
