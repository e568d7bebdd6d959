"""Figure rendering for the CLI report paths.

Each function writes one PNG next to the delimited output it illustrates.
Kept out of the core modules so the library itself never touches a canvas.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

RC = {
    "figure.dpi": 150,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _save(fig, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)


def cost_curves(traces, path) -> None:
    """Running-average cost curves, one line per policy, with error bands."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for label, trace in traces.items():
            ax.plot(trace.record_steps, trace.mean_running_cost, label=label, lw=1.5)
            band = 2.0 * trace.stderr_running_cost
            ax.fill_between(trace.record_steps,
                            trace.mean_running_cost - band,
                            trace.mean_running_cost + band, alpha=0.2)
        ax.set_xlabel("time step")
        ax.set_ylabel("running average covariance trace")
        ax.legend()
        _save(fig, path)


def policy_heatmap(problem, policy, path) -> None:
    """Chosen power as a function of (battery, staleness), split by condition."""
    n_rungs = problem.n_trunc + 1
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, 2, figsize=(10.0, 3.2), sharey=True)
        for cond, ax in zip(("GOOD", "BAD"), axes):
            grid = np.empty((problem.capacity + 1, n_rungs))
            for state in problem.states:
                if state.condition.name == cond:
                    grid[state.battery, state.rung] = policy.table[state.flat_index]
            im = ax.imshow(grid, origin="lower", aspect="auto",
                           interpolation="nearest", cmap="viridis",
                           vmin=0, vmax=problem.capacity)
            ax.set_title(f"{cond.lower()} condition")
            ax.set_xlabel("staleness rung")
            ax.grid(False)
        axes[0].set_ylabel("battery after harvest")
        fig.colorbar(im, ax=axes, label="transmit power", shrink=0.85)
        _save(fig, path)


def power_histogram(dist, path) -> None:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.8, 3.2))
        ax.bar(np.arange(dist.size), dist, color="tab:blue", width=0.7)
        ax.set_xlabel("transmit power")
        ax.set_ylabel("long-run probability")
        ax.set_xticks(np.arange(dist.size))
        _save(fig, path)


def matrix_heatmap(matrix, path, label: str = "probability") -> None:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.8, 4.2))
        im = ax.imshow(matrix, cmap="Blues", vmin=0.0)
        ax.set_xlabel("next pair index")
        ax.set_ylabel("current pair index")
        ax.grid(False)
        fig.colorbar(im, ax=ax, label=label, shrink=0.85)
        _save(fig, path)


def threshold_grid(costs, best, path) -> None:
    """Exact cost over the cap grid; the best pair gets a marker."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.8, 4.2))
        im = ax.imshow(costs, origin="lower", cmap="viridis_r")
        ax.scatter([best[1]], [best[0]], marker="*", s=180, c="white",
                   edgecolors="black", zorder=3)
        ax.set_xlabel("cap in bad condition")
        ax.set_ylabel("cap in good condition")
        ax.set_xticks(np.arange(costs.shape[1]))
        ax.set_yticks(np.arange(costs.shape[0]))
        ax.grid(False)
        fig.colorbar(im, ax=ax, label="average cost", shrink=0.85)
        _save(fig, path)
