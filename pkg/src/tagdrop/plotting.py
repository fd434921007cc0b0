"""Figure rendering for the report-producing CLI paths.

Every plot is optional: the primary outputs are the CSV/JSON files, and a
figure is written next to them only when asked for. matplotlib is imported
lazily and forced onto the Agg backend so headless runs just work.
"""

from __future__ import annotations

from collections.abc import Sequence


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_tdr_series(
    rows: Sequence[dict],
    x_field: str,
    path: str,
    logy: bool = True,
) -> None:
    """Analytic sweep figure: exact and approximate TDR vs the swept value.

    rows come from the analytic sweep (one dict per point, possibly several
    K series); a line is drawn per (K, formula) combination.
    """
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ks = sorted({r["k"] for r in rows})
    for k in ks:
        series = [r for r in rows if r["k"] == k]
        xs = [r[x_field] for r in series]
        ax.plot(xs, [r["tdr_exact"] for r in series], label=f"exact, K={k}")
        ax.plot(
            xs,
            [r["tdr_approx_slot"] for r in series],
            linestyle="--",
            label=f"approx, K={k}",
        )
    if logy:
        positive = [
            v for r in rows for v in (r["tdr_exact"], r["tdr_approx_slot"]) if v > 0
        ]
        if positive:
            ax.set_yscale("log")
    ax.set_xlabel(x_field)
    ax.set_ylabel("tag drop rate")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_rmse_curve(curve: Sequence[tuple[float, float]], alpha_hat: float, path: str) -> None:
    """Calibration figure: RMSE against candidate alpha with the argmin marked."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    xs = [a for a, _ in curve]
    ys = [r for _, r in curve]
    ax.plot(xs, ys, lw=1.2)
    ax.axvline(alpha_hat, color="tab:red", linestyle="--", label=f"alpha_hat={alpha_hat:.3f}")
    ax.set_xlabel("collision zone parameter")
    ax.set_ylabel("RMSE")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_design_table(candidates: Sequence, path: str) -> None:
    """Planner figure: tolerable BER per (L, n_rep) cell, infeasible cells dark."""
    import numpy as np

    plt = _plt()
    ls = sorted({c.l_cycles for c in candidates})
    ns = sorted({c.n_rep for c in candidates})
    grid = np.full((len(ns), len(ls)), np.nan)
    for c in candidates:
        if c.max_tolerable_ber is not None:
            grid[ns.index(c.n_rep), ls.index(c.l_cycles)] = c.max_tolerable_ber
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    im = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(ls)), [str(v) for v in ls])
    ax.set_yticks(range(len(ns)), [str(v) for v in ns])
    ax.set_xlabel("cycles per inventory")
    ax.set_ylabel("ID repetitions")
    fig.colorbar(im, ax=ax, label="max tolerable BER")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_window_missing(per_window_missing: Sequence[int], n_tags: int, path: str) -> None:
    """Trace figure: tags missing per inventory window."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(7.0, 3.0))
    ax.bar(range(len(per_window_missing)), per_window_missing, width=1.0)
    ax.set_ylim(0, max(1, n_tags))
    ax.set_xlabel("inventory window")
    ax.set_ylabel("missing tags")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
