"""SVG figures for run directories (matplotlib, non-interactive backend).

Figures are for people reading a run; verdicts never depend on them.
"""

from __future__ import annotations

import functools
import threading
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
    "legend.frameon": False,
    "svg.hashsalt": "mcflab",
}


_LOCK = threading.Lock()


def _locked(fn):
    # pyplot and rcParams are process-global; concurrent runs take turns.
    # The style must stay active through savefig for the svg hash salt to apply.
    @functools.wraps(fn)
    def wrapper(*args, **kw):
        with _LOCK, plt.rc_context(STYLE):
            return fn(*args, **kw)

    return wrapper


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _figure(**kw):
    return plt.subplots(**kw)


@_locked
def plot_H(path, t, H_exact, t_numeric=None, H_numeric=None, title: str = "") -> Path:
    """Mean curvature against time; the numerical track is drawn as markers."""
    fig, ax = _figure()
    ax.semilogy(t, H_exact, lw=1.5, label="closed form")
    if H_numeric is not None:
        ax.semilogy(t_numeric, H_numeric, ".", ms=3, label="ODE")
    ax.set_xlabel("t")
    ax.set_ylabel("H(t)")
    ax.set_title(title)
    ax.legend()
    return _save(fig, path)


@_locked
def plot_norm_traces(path, traces: Sequence[tuple[str, np.ndarray, np.ndarray]],
                     xlabel: str = "t", logx: bool = False, title: str = "") -> Path:
    """Accumulated space-time integrals; each trace is ``(label, x, accumulated)``."""
    fig, ax = _figure()
    for label, x, acc in traces:
        ax.plot(x, acc, lw=1.2, label=label)
    ax.set_yscale("log")
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("accumulated integral")
    ax.set_title(title)
    if traces:
        ax.legend(fontsize=8)
    return _save(fig, path)


_VERDICT_CODE = {"finite": 0, "divergent": 1, "inconclusive": 2}


@_locked
def plot_verdict_table(path, rows: Sequence[dict]) -> Path:
    """Grid of classifications: one row per ``(n, c)``, one column per exponent offset ``alpha - n``."""
    keys = sorted({(r["n"], r["c"]) for r in rows})
    offsets = sorted({float(r["alpha"]) - r["n"] for r in rows})
    grid = np.full((len(keys), len(offsets)), np.nan)
    wrong = []
    for r in rows:
        i, j = keys.index((r["n"], r["c"])), offsets.index(float(r["alpha"]) - r["n"])
        grid[i, j] = _VERDICT_CODE[r["classification"]]
        if not r["correct"]:
            wrong.append((i, j))
    fig, ax = _figure(figsize=(1.2 + 0.9 * len(offsets), 0.8 + 0.4 * len(keys)))
    cmap = matplotlib.colors.ListedColormap(["#4c9f70", "#c8553d", "#b0b0b0"])
    ax.imshow(grid, cmap=cmap, vmin=-0.5, vmax=2.5, aspect="auto")
    for i in range(len(keys)):
        for j in range(len(offsets)):
            if not np.isnan(grid[i, j]):
                label = ("F", "D", "?")[int(grid[i, j])] + (" x" if (i, j) in wrong else "")
                ax.text(j, i, label, ha="center", va="center", fontsize=8)
    ax.set_xticks(range(len(offsets)), [f"n{o:+g}" for o in offsets])
    ax.set_yticks(range(len(keys)), [f"n={n}, c={c}" for n, c in keys])
    ax.set_xlabel("alpha")
    ax.grid(False)
    ax.set_title("F finite, D divergent, x misclassified", fontsize=9)
    return _save(fig, path)


@_locked
def plot_profiles(path, snapshots: Sequence[tuple[float, np.ndarray, np.ndarray]]) -> Path:
    """Profile curves ``(t, x, rho)`` mirrored about the axis."""
    fig, ax = _figure()
    cmap = plt.get_cmap("viridis")
    for k, (t, x, y) in enumerate(snapshots):
        col = cmap(k / max(len(snapshots) - 1, 1))
        ax.plot(x, y, color=col, lw=1.0, label=f"t = {t:.4g}")
        ax.plot(x, -np.asarray(y), color=col, lw=1.0)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("rho")
    ax.legend(fontsize=7, loc="upper right")
    return _save(fig, path)


@_locked
def plot_series(path, x, series: Sequence[tuple[str, np.ndarray]], xlabel: str, ylabel: str,
                logy: bool = False, title: str = "") -> Path:
    fig, ax = _figure()
    for label, y in series:
        ax.plot(x, y, lw=1.2, label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if len(series) > 1:
        ax.legend(fontsize=8)
    return _save(fig, path)


@_locked
def plot_histogram(path, values, xlabel: str, title: str = "") -> Path:
    fig, ax = _figure()
    ax.hist(np.asarray(values), bins=40)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    ax.set_title(title)
    return _save(fig, path)
