"""Convergence figures rendered next to the trace CSVs.

Every figure is derived from already-written trace files so the plots can
be regenerated offline from the delimited output alone.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _loglog_panel(ax, ks, values, label):
    mask = np.isfinite(values) & (values > 0) & (ks > 0)
    if mask.sum() < 2:
        return False
    ax.loglog(ks[mask], values[mask], marker="o", ms=3, lw=1.2, label=label)
    return True


def render_trace_figure(trace, path, title=""):
    """Log-log convergence panels for every plottable trace column."""
    ks = trace.column("k")
    panels = [c for c in trace.columns if c not in ("k", "wall_time_ms", "r_k", "messages_cum", "oracle_calls_cum")]
    fig, axes = plt.subplots(1, len(panels), figsize=(4.2 * len(panels), 3.4), squeeze=False)
    drew_any = False
    for ax, col in zip(axes[0], panels):
        drew = _loglog_panel(ax, ks, trace.column(col), col)
        drew_any = drew_any or drew
        ax.set_xlabel("iteration")
        ax.set_ylabel(col)
        ax.grid(True, which="both", alpha=0.3)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return drew_any


def render_barycenter_figure(grid, estimate, measures, path, reference=None, title=""):
    """Estimated barycenter over the measure family (and the reference)."""
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    for q in measures:
        ax.plot(grid, np.asarray(q), color="0.8", lw=0.8)
    ax.plot(grid, np.asarray(estimate), color="C0", lw=1.8, label="estimate")
    if reference is not None:
        ax.plot(grid, np.asarray(reference), color="C3", lw=1.2, ls="--", label="true barycenter")
    ax.set_xlabel("support")
    ax.set_ylabel("mass")
    ax.legend(loc="best", fontsize=8)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_comparison_figure(traces, column, path, title=""):
    """Overlay one column of several labelled traces (e.g. per topology)."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for label, trace in traces.items():
        _loglog_panel(ax, trace.column("k"), trace.column(column), label)
    ax.set_xlabel("iteration")
    ax.set_ylabel(column)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
