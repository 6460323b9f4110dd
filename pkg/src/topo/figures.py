"""Render learning-curve and comparison figures next to the CSV reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_learning_curves(agg: dict[str, np.ndarray], path: str, title: str = "") -> None:
    """Three stacked panels: return (with spread band), success rate, MMD distance."""
    episodes = agg["episode"]
    fig, axes = plt.subplots(3, 1, figsize=(7, 8), sharex=True)

    axes[0].plot(episodes, agg["mean_return"], color="tab:blue")
    axes[0].fill_between(
        episodes,
        agg["mean_return"] - agg["std_return"],
        agg["mean_return"] + agg["std_return"],
        alpha=0.25,
        color="tab:blue",
    )
    axes[0].set_ylabel("return")

    axes[1].plot(episodes, agg["mean_success"], color="tab:green")
    axes[1].set_ylabel("success rate")
    axes[1].set_ylim(-0.05, 1.05)

    axes[2].plot(episodes, agg["mean_mmd"], color="tab:red")
    axes[2].set_ylabel("MMD$^2$ to demos")
    axes[2].set_xlabel("episode")

    if title:
        axes[0].set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_comparison(
    topo_agg: dict[str, np.ndarray],
    base_agg: dict[str, np.ndarray],
    path: str,
) -> None:
    """Overlayed success-rate and MMD curves for a run and its baseline."""
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))

    for agg, label, color in (
        (topo_agg, "with intrinsic reward", "tab:blue"),
        (base_agg, "baseline (sigma = 0)", "tab:orange"),
    ):
        axes[0].plot(agg["episode"], agg["mean_success"], label=label, color=color)
        axes[1].plot(agg["episode"], agg["mean_mmd"], label=label, color=color)

    axes[0].set_xlabel("episode")
    axes[0].set_ylabel("success rate")
    axes[0].set_ylim(-0.05, 1.05)
    axes[0].legend()
    axes[1].set_xlabel("episode")
    axes[1].set_ylabel("MMD$^2$ to demos")
    axes[1].legend()

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
