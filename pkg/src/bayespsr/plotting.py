"""Deterministic SVG plots of aggregated metrics versus cumulative shots."""
from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .harness import AggregateRow  # noqa: E402

METRICS = {"energy": ("energy", "ΔEnergy"), "fidelity": ("fidelity", "ΔFidelity")}
# log axes cannot show exact zeros
_FLOOR = 1e-12


def emit_plot(rows: Sequence[AggregateRow], metric: str, out) -> dict:
    """Median line and interquartile band per method on log-log axes.

    Returns the axis limits as ``{"x": (lo, hi), "y": (lo, hi)}``.
    """
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {', '.join(METRICS)}")
    rows = list(rows)
    if not rows:
        raise ValueError("nothing to plot: empty aggregate")
    prefix, label = METRICS[metric]
    matplotlib.rcParams["svg.hashsalt"] = "bayespsr"
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    xs_all, ys_all = [], []
    for m in sorted({r.method for r in rows}):
        sel = sorted((r for r in rows if r.method == m), key=lambda r: r.cumulative_shots)
        x = np.array([r.cumulative_shots for r in sel])
        lo, med, hi = (np.maximum(np.array([getattr(r, f"{prefix}_{q}") for r in sel]), _FLOOR)
                       for q in ("p25", "median", "p75"))
        ok = np.isfinite(med)
        if not ok.any():
            continue
        ax.fill_between(x[ok], lo[ok], hi[ok], alpha=0.25, linewidth=0)
        ax.plot(x[ok], med[ok], label=m)
        xs_all.append(x[ok])
        ys_all.extend([lo[ok], hi[ok], med[ok]])
    if not xs_all:
        plt.close(fig)
        raise ValueError("nothing to plot: all values are missing")
    x = np.concatenate(xs_all)
    y = np.concatenate(ys_all)
    xlim = (float(x.min()) / 1.1, float(x.max()) * 1.1)
    ylim = (float(y.min()) / 1.5, float(y.max()) * 1.5)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlim(*xlim)
    ax.set_ylim(*ylim)
    ax.set_xlabel("cumulative shots")
    ax.set_ylabel(label)
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return {"x": xlim, "y": ylim}
