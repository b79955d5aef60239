"""Static SVG charts with reproducible bytes."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["line_plot", "scatter_fit"]

# fixed element ids and no date stamp keep repeated runs byte-identical
matplotlib.rcParams["svg.hashsalt"] = "gradflow"
matplotlib.rcParams["svg.fonttype"] = "none"


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def line_plot(path, x, ys: dict, xlabel: str, ylabel: str, logy: bool = False, title: str = ""):
    """One line per entry of ``ys`` (label to values)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, y in ys.items():
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(y) & ((y > 0) if logy else True)
        ax.plot(np.asarray(x)[ok], y[ok], label=label, lw=1.2)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(ys) > 1:
        ax.legend()
    fig.tight_layout()
    _save(fig, path)


def scatter_fit(path, x, y, xlabel: str, ylabel: str, title: str = ""):
    """Log-log scatter with its least-squares line; returns the fitted slope."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    lx, ly = np.log(x[ok]), np.log(y[ok])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.scatter(lx, ly, s=2, alpha=0.4)
    slope = float("nan")
    if ok.sum() > 1:
        slope, icpt = np.polyfit(lx, ly, 1)
        xx = np.array([lx.min(), lx.max()])
        ax.plot(xx, slope * xx + icpt, color="C3", label=f"slope {slope:.4f}")
        ax.legend()
    ax.set_xlabel(f"log {xlabel}")
    ax.set_ylabel(f"log {ylabel}")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)
    return float(slope)
