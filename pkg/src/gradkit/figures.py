"""Figure rendering for sweep and eval reports.

Figures are written next to the delimited report output. Rendering is
best-effort presentation; the CSV/JSON files remain the canonical data.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .graph import GraphStats
from .harness import EvalReport

_FIGSIZE = (6.0, 3.7)


def _new_axes(ylabel: str, xlabel: str):
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_alpha_sweep(reports: Sequence[EvalReport], path: str | Path) -> Path:
    """Exact match vs fusion weight; the alpha=0 point is the greedy baseline."""
    fig, ax = _new_axes("exact match", "fusion weight alpha")
    xs = [r.alpha for r in reports]
    ys = [r.exact_match for r in reports]
    ax.plot(xs, ys, marker="o", color="tab:blue")
    for r in reports:
        if r.method == "GREEDY":
            ax.axhline(r.exact_match, color="tab:gray", linestyle=":", linewidth=1,
                       label="greedy baseline")
            break
    ax.set_ylim(-0.02, 1.02)
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    return _save(fig, path)


def render_corpus_sweep(reports: Sequence[EvalReport], path: str | Path) -> Path:
    """Exact match vs graph corpus size."""
    fig, ax = _new_axes("exact match", "graph corpus size")
    xs = [r.corpus_size for r in reports]
    ys = [r.exact_match for r in reports]
    ax.plot(xs, ys, marker="s", color="tab:green")
    ax.set_ylim(-0.02, 1.02)
    return _save(fig, path)


def render_graph_growth(stats_list: Sequence[GraphStats], path: str | Path) -> Path:
    """Nodes (solid) and edges (dashed) vs corpus size, ratio on a twin axis."""
    fig, ax = _new_axes("count", "graph corpus size")
    xs = [s.corpus_size for s in stats_list]
    ax.plot(xs, [s.nodes for s in stats_list], marker="o", color="tab:blue",
            linestyle="-", label="nodes")
    ax.plot(xs, [s.edges for s in stats_list], marker="^", color="tab:red",
            linestyle="--", label="edges")
    ax2 = ax.twinx()
    ax2.plot(xs, [s.edge_node_ratio for s in stats_list], marker=".",
             color="tab:purple", linestyle="-.", label="edges/nodes")
    ax2.set_ylabel("edges/nodes")
    lines, labels = ax.get_legend_handles_labels()
    lines2, labels2 = ax2.get_legend_handles_labels()
    ax.legend(lines + lines2, labels + labels2, loc="upper left")
    return _save(fig, path)


def render_eval_comparison(reports: Sequence[EvalReport], path: str | Path) -> Path:
    """Bar chart of exact match per method row."""
    fig, ax = _new_axes("exact match", "")
    labels = [f"{r.method}\nalpha={r.alpha:g}" for r in reports]
    ys = [r.exact_match for r in reports]
    colors = ["tab:gray" if r.method == "GREEDY" else "tab:blue" for r in reports]
    ax.bar(labels, ys, color=colors, width=0.5)
    ax.set_ylim(0, 1.05)
    for x, y in enumerate(ys):
        ax.text(x, y + 0.01, f"{y:.3f}", ha="center", fontsize=9)
    return _save(fig, path)
