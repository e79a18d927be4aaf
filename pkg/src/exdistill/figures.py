"""Figure rendering for report outputs.

Every report the CLI writes as JSON also gets a PNG rendering next to it so
runs can be eyeballed without loading the numbers anywhere. All functions
take already-aggregated data (report dicts, grid results) and a target path;
nothing here recomputes statistics.
"""
from __future__ import annotations

from pathlib import Path
from typing import Mapping

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_BAR_COLORS = ("#4c72b0", "#dd8452", "#55a868", "#c44e52")


def save_accuracy_figure(report: Mapping, path: str | Path,
                         title: str = "Accuracy by mode and annotation method") -> None:
    """Grouped bars of mean accuracy per mode, one group per method, std whiskers."""
    cells = list(report.get("cells", []))
    if not cells:
        raise ValueError("report holds no cells to plot")
    methods = sorted({cell["method"] for cell in cells})
    modes = sorted({cell["mode"] for cell in cells})
    by_key = {(cell["mode"], cell["method"]): cell for cell in cells}

    fig, ax = plt.subplots(figsize=(max(6.0, 2.0 * len(methods)), 4.5))
    width = 0.8 / max(len(modes), 1)
    for mode_index, mode in enumerate(modes):
        positions, means, stds = [], [], []
        for method_index, method in enumerate(methods):
            cell = by_key.get((mode, method))
            if cell is None:
                continue
            positions.append(method_index + mode_index * width)
            means.append(cell["mean"])
            stds.append(cell["std"])
        ax.bar(positions, means, width=width, yerr=stds, capsize=3,
               label=mode, color=_BAR_COLORS[mode_index % len(_BAR_COLORS)])
    ax.set_xticks([i + width * (len(modes) - 1) / 2 for i in range(len(methods))])
    ax.set_xticklabels(methods)
    ax.set_ylabel("accuracy (%)")
    ax.set_title(title)
    ax.legend(title="mode", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_grid_figure(grid: Mapping, path: str | Path,
                     title: str = "Loss weight sweep") -> None:
    """Dev accuracy across the loss-weight grid with the selected point marked."""
    accuracies = grid.get("dev_accuracy", {})
    if not accuracies:
        raise ValueError("grid result holds no accuracies to plot")
    alphas = sorted(float(a) for a in accuracies)
    values = [accuracies[f"{a:g}"] for a in alphas]
    alpha_star = grid.get("alpha_star")

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(alphas, values, marker="o", color=_BAR_COLORS[0])
    if alpha_star is not None:
        star = float(alpha_star)
        ax.scatter([star], [accuracies[f"{star:g}"]], marker="*", s=220,
                   color=_BAR_COLORS[3], zorder=3, label=f"selected ({star:g})")
        ax.legend(fontsize="small")
    ax.set_xlabel("answer-task loss weight")
    ax.set_ylabel("dev accuracy")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_preference_figure(report: Mapping, path: str | Path,
                           label_a: str = "model A", label_b: str = "model B") -> None:
    """Two panels: preference split and annotator agreement levels."""
    fig, (left, right) = plt.subplots(1, 2, figsize=(8.0, 4.0))

    outcomes = [label_a, "tie", label_b]
    percents = [report["pct_a"], report["pct_tie"], report["pct_b"]]
    left.bar(outcomes, percents, color=_BAR_COLORS[:3])
    left.set_ylabel("% of examples")
    left.set_title(f"Preference (n={report.get('n_examples', '?')})")

    levels = report["level_counts"]
    level_keys = sorted(levels, key=lambda k: int(k))
    right.bar([f"level {k}" for k in level_keys],
              [levels[k] for k in level_keys], color=_BAR_COLORS[0])
    right.set_ylabel("% of examples")
    right.set_title("Annotator agreement")

    for ax in (left, right):
        ax.set_ylim(0, 100)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
