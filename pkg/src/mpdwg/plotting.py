"""Figures for convergence studies, rendered to files with the Agg backend."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

SERIES = (("e0", r"$\|e_0\|$", "o"), ("eg", r"$\|e_g\|$", "s"), ("gamma", r"$\|\gamma_h\|$", "^"))


def _reference_slope(ax, x, y, order, label):
    x = np.asarray(x, dtype=float)
    anchor = y[-1] * 1.6
    ax.loglog(x, anchor * (x / x[-1]) ** (-order), "k:", lw=0.8)
    ax.annotate(label, (x[-1], anchor), textcoords="offset points", xytext=(4, 0), fontsize=8)


def convergence_figure(table, path, title: str = "") -> Path:
    """Log-log error curves against 1/h with one reference slope per series."""
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    x = np.asarray(table.column("inv_h"), dtype=float)
    for name, label, marker in SERIES:
        y = np.asarray(table.column(name), dtype=float)
        keep = y > 0
        if keep.sum() < 1:
            continue
        ax.loglog(x[keep], y[keep], marker=marker, label=label)
        order = table.final_order(name)
        if order is not None and keep.sum() >= 2:
            _reference_slope(ax, x[keep], y[keep], order, f"{order:.2f}")
    ax.set_xlabel("1/h")
    ax.set_ylabel("error")
    if title:
        ax.set_title(title, fontsize=10)
    ax.grid(True, which="both", lw=0.3)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def multiplier_figure(levels, gamma_pdwg, gamma_mpdwg, path, title: str = "") -> Path:
    """Two panels: multiplier error with and without the c-term.  Missing points are skipped."""
    fig, axes = plt.subplots(1, 2, figsize=(8.0, 3.5), sharex=True)
    levels = np.asarray(levels)
    for ax, values, label in ((axes[0], gamma_pdwg, "c = 0"), (axes[1], gamma_mpdwg, "c = c_h")):
        vals = np.array([np.nan if v is None else v for v in values], dtype=float)
        ok = np.isfinite(vals) & (vals > 0)
        ax.semilogy(levels[ok], vals[ok], "o-")
        ax.set_title(label, fontsize=10)
        ax.set_xlabel("level")
        ax.grid(True, which="both", lw=0.3)
    axes[0].set_ylabel(r"$\|\gamma_h\|$")
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
