"""Figure rendering for sweep outputs (headless backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import AggregateRow


def render_sum_rate_figure(rows: list[AggregateRow], path: str):
    """Average achieved sum rate vs. number of virtual cells.

    One error-bar curve per (method, rule) pair; y in Mbit/s.
    """
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    pairs = sorted({(r.method, r.rule) for r in rows})
    for method, rule in pairs:
        series = sorted((r for r in rows
                         if r.method == method and r.rule == rule),
                        key=lambda r: r.num_cells)
        x = [r.num_cells for r in series]
        y = [r.mean_achieved_rate_bps / 1e6 for r in series]
        err = [r.stderr_achieved_rate_bps / 1e6 for r in series]
        ax.errorbar(x, y, yerr=err, marker="o", capsize=3,
                    label=f"{method}, {rule}")
    ax.set_xlabel("Number of virtual cells")
    ax.set_ylabel("Average achieved sum rate (Mbit/s)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
