"""Figure rendering for the report paths.

Renders alongside the delimited output: log-log convergence plots for
order reports and drift series for simulations.  The Agg backend is
forced so batch runs never touch a display.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

# keep PNG bytes reproducible across identical runs
_METADATA = {"Software": "groupoid-vi"}


def save_order_figure(reports: dict, path, title=""):
    """Log-log error plot with the fitted slopes, one curve per report."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    markers = ("o", "s", "^", "d")
    for (label, report), marker in zip(reports.items(), markers):
        if not report.h_values:
            continue
        h = np.asarray(report.h_values)
        e = np.maximum(np.asarray(report.errors), 1e-300)
        if report.slope is not None:
            label = f"{label} (slope {report.slope:.2f})"
        else:
            label = f"{label} ({report.verdict})"
        ax.loglog(h, e, marker=marker, ls="--", label=label)
        if report.floor > 0:
            ax.axhline(report.floor, color="0.7", lw=0.8, zorder=0)
    ax.set_xlabel("h")
    ax.set_ylabel("error")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_METADATA)
    plt.close(fig)


def save_drift_figure(energies, casimirs, path, title=""):
    """Energy and Casimir series against the step index."""
    n_axes = int(energies is not None) + int(casimirs is not None)
    if n_axes == 0:
        n_axes = 1
    fig, axes = plt.subplots(n_axes, 1, figsize=(6.0, 2.8 * n_axes),
                             sharex=True, squeeze=False)
    row = 0
    if energies is not None:
        ax = axes[row, 0]
        ax.plot(np.arange(1, len(energies) + 1), energies, lw=0.8)
        ax.set_ylabel("energy")
        ax.grid(alpha=0.3)
        row += 1
    if casimirs is not None:
        ax = axes[row, 0]
        ax.plot(np.arange(1, len(casimirs) + 1), casimirs, lw=0.8, color="C1")
        ax.set_ylabel("|momentum|")
        ax.grid(alpha=0.3)
    axes[-1, 0].set_xlabel("step")
    if title:
        axes[0, 0].set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_METADATA)
    plt.close(fig)
