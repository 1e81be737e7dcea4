"""Figure rendering for the report path.

Every CLI command that writes tables also renders a small matplotlib
figure next to them.  Figures are part of the determinism contract, so
the backend is pinned to Agg, sizes and dpi are fixed, and the PNG
Software metadata chunk is stripped (it is the only varying chunk Agg
would emit).
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "save_figure",
    "line_figure",
    "bar_figure",
    "field_figure",
]

_RC = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
}


def save_figure(fig, path: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    tmp = os.path.join(directory, f".{os.path.basename(path)}.tmp")
    try:
        fig.savefig(tmp, format="png", metadata={"Software": None})
        os.replace(tmp, path)
    finally:
        plt.close(fig)
        if os.path.exists(tmp):
            os.remove(tmp)


def line_figure(
    xs,
    series: dict[str, np.ndarray | list],
    xlabel: str,
    ylabel: str,
    title: str,
    logx: bool = False,
    logy: bool = False,
    marker: str = "o",
):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for name, ys in series.items():
            ax.plot(xs, ys, marker=marker, markersize=3.5, linewidth=1.2, label=name)
        if logx:
            ax.set_xscale("log", base=2)
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        if len(series) > 1:
            ax.legend(fontsize=8)
        fig.tight_layout()
    return fig


def bar_figure(labels: list[str], values, ylabel: str, title: str):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        pos = np.arange(len(labels))
        ax.bar(pos, values, width=0.6)
        ax.set_xticks(pos)
        ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        fig.tight_layout()
    return fig


def field_figure(x, fields: dict[str, np.ndarray], xlabel: str, title: str):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for name, vals in fields.items():
            ax.step(x, vals, where="mid", linewidth=1.0, label=name)
        ax.set_xlabel(xlabel)
        ax.set_title(title)
        ax.legend(fontsize=8)
        fig.tight_layout()
    return fig
