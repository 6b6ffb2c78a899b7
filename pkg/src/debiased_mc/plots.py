"""Figure rendering for the CLI report path.

Figures are written next to the delimited output and are diagnostic only;
the CSV/JSON report stays the machine-readable artifact.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["save_estimate_figure", "save_design_figure"]


def save_estimate_figure(path, experiment, ys, levels, report):
    """Two-panel summary: replicate-value histogram and level frequencies."""
    ok = np.isfinite(ys)
    ys = ys[ok]
    levels = levels[ok]
    fig, (ax_hist, ax_lvl) = plt.subplots(1, 2, figsize=(9.0, 3.4))

    # clip extreme tails so the histogram stays readable
    lo, hi = np.percentile(ys, [0.1, 99.9])
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    ax_hist.hist(np.clip(ys, lo, hi), bins=80, color="#4878d0")
    ax_hist.axvline(report.mean, color="k", lw=1.2, label=f"mean = {report.mean:.5g}")
    ax_hist.set_xlabel("replicate value")
    ax_hist.set_ylabel("count")
    ax_hist.legend(frameon=False, fontsize=8)

    vals, counts = np.unique(levels, return_counts=True)
    ax_lvl.bar(vals, counts / len(levels), color="#ee854a", width=0.8)
    ax_lvl.set_xlabel("truncation level N")
    ax_lvl.set_ylabel("frequency")
    ax_lvl.set_yscale("log")

    fig.suptitle(
        f"{experiment}: mean {report.mean:.6g} +/- {report.stderr:.2g} "
        f"(M = {report.m}, mean cost {report.mean_cost:.3g})",
        fontsize=10,
    )
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_design_figure(path, rows):
    """Inflation factor and optimal variance across convergence ratios."""
    r = [row["r"] for row in rows]
    fig, (ax_inf, ax_var) = plt.subplots(1, 2, figsize=(9.0, 3.4))

    ax_inf.plot(r, [row["inflation"] for row in rows], "o-", color="#4878d0", ms=3)
    ax_inf.set_xlabel("convergence ratio r")
    ax_inf.set_ylabel("MSE inflation factor")

    ax_var.semilogy(r, [row["min_variance"] for row in rows], "o-", color="#ee854a", ms=3)
    ax_var.set_xlabel("convergence ratio r")
    ax_var.set_ylabel("optimal variance")

    fig.suptitle("debiasing cost and optimal-law variance", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
