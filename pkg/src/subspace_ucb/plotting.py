"""Matplotlib figures for experiment outputs (box plots, data profiles, regret curves)."""

from __future__ import annotations

import os
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_ratios", "plot_data_profile", "plot_regret", "render_experiment"]

_STYLE = {
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
}


def _save(fig, path) -> str:
    os.makedirs(os.path.dirname(os.fspath(path)) or ".", exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return os.fspath(path)


def plot_ratios(ratios: Sequence[tuple[str, int, float]], path, title: str = "") -> str:
    """Box plot of performance ratios, one box per problem."""
    groups: dict[str, list[float]] = {}
    for prob, _, r in ratios:
        groups.setdefault(prob, []).append(r)
    names = sorted(groups)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(max(4.0, 0.7 * len(names) + 2), 3.6))
        if names:
            ax.boxplot([groups[n] for n in names], widths=0.6)
            ax.set_xticks(range(1, len(names) + 1))
            ax.set_xticklabels(names, rotation=45, ha="right")
        ax.axhline(0.0, color="k", lw=0.8)
        ax.set_ylabel("r  (positive favours UCB)")
        ax.set_title(title)
        return _save(fig, path)


def plot_data_profile(profile, path, title: str = "") -> str:
    """Step plot of each solver's solved fraction against budget units."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.8, 3.6))
        for solver, curve in profile.curves.items():
            ax.step(profile.budgets, curve, where="post", label=solver)
        ax.set_xlabel("budget (units of d + 2 evaluations)")
        ax.set_ylabel("fraction solved")
        ax.set_ylim(-0.02, 1.02)
        ax.set_title(title or f"tau = {profile.tau:g}")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_regret(curves: Mapping[str, np.ndarray], path, bounds: Mapping[str, float] | None = None,
                title: str = "") -> str:
    """Average dynamic regret ``D_k / k`` for each labelled run."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.8, 3.6))
        for label, D in curves.items():
            D = np.asarray(D, dtype=float)
            k = np.arange(1, len(D) + 1)
            ax.loglog(k, np.maximum(D / k, 1e-300), label=label)
            if bounds and label in bounds and bounds[label]:
                ax.axhline(bounds[label] / len(D), ls="--", lw=0.8)
        ax.set_xlabel("iteration k")
        ax.set_ylabel("D_k / k")
        ax.set_title(title)
        if curves:
            ax.legend(frameon=False, fontsize=8)
        return _save(fig, path)


def render_experiment(result, folder=None) -> list[str]:
    """Write every figure an :class:`ExperimentResult` supports; return the paths."""
    folder = folder or os.path.join(result.output_dir, "figures")
    paths = []
    if result.ratios:
        paths.append(plot_ratios(result.ratios, os.path.join(folder, "ratios.png"),
                                 "random vs UCB"))
    for tau, prof in result.profiles.items():
        paths.append(plot_data_profile(prof, os.path.join(folder, f"profile_tau={tau:g}.png")))
    return paths
