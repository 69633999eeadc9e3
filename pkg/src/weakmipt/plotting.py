"""PNG figures for the CLI reports."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# no timestamps in the PNG metadata keeps reruns byte-stable
_META = {"Software": None}


def plot_curves(curves: dict, xlabel: str, ylabel: str, path, title: str = None,
                markers: bool = True, hline=None, xlog=False):
    """``curves = {label: (x, y, err or None)}``."""
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for label, (x, y, err) in curves.items():
        style = "o-" if markers else "-"
        if err is not None:
            ax.errorbar(x, y, yerr=err, fmt=style, ms=3, capsize=2, label=str(label))
        else:
            ax.plot(x, y, style, ms=3, label=str(label))
    if hline is not None:
        ax.axhline(hline, color="k", lw=0.6, ls=":")
    if xlog:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=9)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)


def plot_heatmap(x, y, Z, xlabel: str, ylabel: str, path, title: str = None, cbar: str = ""):
    fig, ax = plt.subplots(figsize=(5, 3.8))
    mesh = ax.pcolormesh(np.asarray(x), np.asarray(y), np.asarray(Z), shading="nearest",
                         cmap="viridis")
    fig.colorbar(mesh, ax=ax, label=cbar)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)


def plot_scatter(groups: dict, xlabel: str, ylabel: str, path, title: str = None):
    """``groups = {label: (x, y)}`` as small dots."""
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for label, (x, y) in groups.items():
        ax.plot(x, y, ".", ms=2, alpha=0.6, label=str(label))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=9)
    ax.legend(fontsize=7, markerscale=4)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)
