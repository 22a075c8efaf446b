"""Figure rendering for the reporting commands.

Report-producing CLI commands write delimited output and, alongside it, a
rendered matplotlib figure. Uses the Agg backend so rendering works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .diagnostics import RegPath


def render_regpath(path: RegPath, out_file, title: str | None = None) -> None:
    """Coefficient trajectories versus the shape hyperparameter, one line per weight."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    a_vals, coefs = [], []
    for a, coef in zip(path.a_grid, path.coefficients):
        if coef is not None:
            a_vals.append(a)
            coefs.append(coef.ravel())
    if coefs:
        mat = np.column_stack(coefs)  # (K*p, len(grid))
        for row in mat:
            ax.plot(a_vals, row, lw=1)
    ax.invert_xaxis()  # paths are read with a decreasing
    ax.set_xlabel("shape hyperparameter a")
    ax.set_ylabel("normalized coefficient")
    ax.set_title(title or f"Regularization path ({path.estimator})")
    fig.tight_layout()
    fig.savefig(out_file, dpi=150)
    plt.close(fig)


def render_roc(curves: dict, out_file, title: str = "ROC") -> None:
    """One ROC curve per named method: {name: {"fpr", "tpr", "auc"}}."""
    fig, ax = plt.subplots(figsize=(5.5, 5))
    for name, c in curves.items():
        ax.plot(c["fpr"], c["tpr"], label=f"{name} (AUC {c['auc']:.3f})")
    ax.plot([0, 1], [0, 1], "k--", lw=0.8)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(title)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(out_file, dpi=150)
    plt.close(fig)


def render_ess_bars(report, out_file, title: str = "Effective sample size") -> None:
    """Per-coordinate ESS bar chart for a chain diagnostic report."""
    fig, ax = plt.subplots(figsize=(7, 4))
    names = report.coordinate_names or [str(i) for i in range(len(report.ess_values))]
    ax.bar(range(len(report.ess_values)), report.ess_values)
    ax.axhline(report.min_ess, color="red", lw=0.8, label=f"min {report.min_ess:.0f}")
    step = max(1, len(names) // 20)
    ax.set_xticks(range(0, len(names), step))
    ax.set_xticklabels(names[::step], rotation=90, fontsize=6)
    ax.set_ylabel("ESS")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_file, dpi=150)
    plt.close(fig)
