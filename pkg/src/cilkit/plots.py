"""Figure rendering for the report path; PNGs land next to the CSV output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import RoundReport

_COLORS = plt.rcParams["axes.prop_cycle"].by_key()["color"]


def save_curves_figure(reports_by_label: dict[str, dict[int, list[RoundReport]]],
                       path) -> None:
    """Left: mean accuracy per round (thin per-seed lines, bold mean).
    Right: mean confusion (solid) and forgetting (dashed) counts per round."""
    fig, (ax_acc, ax_err) = plt.subplots(1, 2, figsize=(10, 4))
    for i, (label, by_seed) in enumerate(reports_by_label.items()):
        color = _COLORS[i % len(_COLORS)]
        rounds = [r.round_index for r in next(iter(by_seed.values()))]
        acc = np.array([[r.mean_accuracy for r in reports]
                        for reports in by_seed.values()])
        for row in acc:
            ax_acc.plot(rounds, row, color=color, alpha=0.25, lw=0.8)
        ax_acc.plot(rounds, acc.mean(axis=0), color=color, lw=2.0, label=label)
        conf = np.array([[r.confusion_errors for r in reports]
                         for reports in by_seed.values()]).mean(axis=0)
        forg = np.array([[r.forgetting_errors for r in reports]
                         for reports in by_seed.values()]).mean(axis=0)
        ax_err.plot(rounds, conf, color=color, lw=1.5, label=f"{label} confusion")
        ax_err.plot(rounds, forg, color=color, lw=1.5, ls="--",
                    label=f"{label} forgetting")
    ax_acc.set_xlabel("round")
    ax_acc.set_ylabel("mean accuracy")
    ax_acc.set_ylim(0, 1)
    ax_acc.legend(fontsize=8)
    ax_err.set_xlabel("round")
    ax_err.set_ylabel("mean error count")
    ax_err.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_ablation_figure(labels: list[str], final_means: list[float],
                         avg_means: list[float], path) -> None:
    """The two ablation panels: final-round accuracy and the average of the
    per-round mean accuracies, both against the similar-class count."""
    fig, (ax_final, ax_avg) = plt.subplots(1, 2, figsize=(9, 3.8))
    x = np.arange(len(labels))
    for ax, values, title in ((ax_final, final_means, "final round"),
                              (ax_avg, avg_means, "average over rounds")):
        ax.plot(x, values, marker="o", color=_COLORS[1])
        ax.set_xticks(x)
        ax.set_xticklabels(labels)
        ax.set_xlabel("similar old classes per new class")
        ax.set_ylabel("mean accuracy")
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
