"""Figure builders: subset/combined density overlays and the rate plot.

Figures are pure functions of the input files: fixed style, fixed size, and
scrubbed output metadata, so rendering the same inputs twice produces
byte-identical image files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import InsufficientData
from .io import read_curve, read_density_table, read_results_table, read_report

SUBSET_COLORS = ["red", "blue", "green", "purple", "gray", "orange", "brown", "teal"]
_METADATA = {"Software": "plotviz"}


def _save(fig, out):
    if out is not None:
        kind = Path(out).suffix.lstrip(".").lower()
        metadata = dict(_METADATA)
        if kind == "svg":
            metadata["Date"] = None
        elif kind == "pdf":
            metadata = {"CreationDate": None, "Producer": "plotviz"}
        fig.savefig(out, dpi=150, metadata=metadata)
        plt.close(fig)
    return fig


def plot_densities(subset_tables, full_table=None, combined_table=None, out=None):
    """Subset density curves, optional full-posterior line, optional combined
    estimator points, all read from table files."""
    curves = [read_density_table(p) for p in subset_tables]
    full = read_curve(full_table) if full_table is not None else None
    combined = read_curve(combined_table) if combined_table is not None else None
    if not curves and full is None and combined is None:
        raise InsufficientData("nothing to plot")

    fig, ax = plt.subplots(figsize=(7.2, 4.8))
    for index, (x, dens) in enumerate(curves):
        color = SUBSET_COLORS[index % len(SUBSET_COLORS)]
        ax.plot(x, dens, color=color, linewidth=1.2, label=f"subset {index + 1}")
    if full is not None:
        ax.plot(full[0], full[1], color="black", linewidth=1.8, label="full posterior")
    if combined is not None:
        ax.plot(combined[0], combined[1], linestyle="none", marker="o",
                markersize=2.5, color="tab:blue", label="combined estimator")
    ax.set_xlabel("theta")
    ax.set_ylabel("density")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return _save(fig, out)


def plot_mise(results_table, report, out=None):
    """Log-log mean ISE with deviation bars, regression line, and the
    theoretical bound line; slope and bound constant go into the legend."""
    table = read_results_table(results_table)
    meta = read_report(report)
    n = table["n"]
    if n.size < 3:
        raise InsufficientData(f"need at least 3 grid points, got {n.size}")

    fig, ax = plt.subplots(figsize=(7.2, 4.8))
    ax.errorbar(n, table["mean_ise"], yerr=table["std_ise"], fmt="o",
                color="black", markersize=4, capsize=3, linewidth=1,
                label="mean ISE (std bars)")
    span = np.linspace(n.min(), n.max(), 200)
    regression = np.exp(meta["intercept"]) * span ** meta["slope"]
    ax.plot(span, regression, color="tab:blue", linewidth=1.4,
            label=f"regression, slope {meta['slope']:.3f}")
    bound = meta["bound_constant"] * span ** meta["theoretical_slope"]
    ax.plot(span, bound, color="red", linewidth=1.4,
            label=(f"bound C n^{meta['theoretical_slope']:g}, "
                   f"C={meta['bound_constant']:.4g}"))
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("samples per subset")
    ax.set_ylabel("mean integrated squared error")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return _save(fig, out)
