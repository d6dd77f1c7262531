"""Figures for reports: Hasse diagrams, class heatmaps, bipartite encodings."""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .poset_core import FinitePoset, bits, format_address  # noqa: E402


def _save(fig, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def covers(P: FinitePoset) -> list[tuple[int, int]]:
    out = []
    for i in range(P.n):
        lower = P.strict_below(i)
        for j in bits(lower):
            if not any(P.strict_below(k) >> j & 1 for k in bits(lower)):
                out.append((j, i))
    return out


def hasse_diagram(P: FinitePoset, path: str, title: str | None = None) -> str:
    by_height: dict[int, list[int]] = {}
    for i, h in enumerate(P.heights):
        by_height.setdefault(h, []).append(i)
    pos = {}
    for h, row in by_height.items():
        for k, i in enumerate(row):
            pos[i] = (k - (len(row) - 1) / 2, h)
    fig, ax = plt.subplots(figsize=(max(3, 1.2 * max(map(len, by_height.values()))), 1 + 0.6 * len(by_height)))
    for j, i in covers(P):
        ax.plot([pos[j][0], pos[i][0]], [pos[j][1], pos[i][1]], color="0.5", lw=1, zorder=1)
    for i, (x, y) in pos.items():
        ax.scatter([x], [y], s=60, color="white", edgecolor="black", zorder=2)
        ax.annotate(f"{format_address(P.nodes[i])}  δ={P.delta[i]}", (x, y), xytext=(7, 0),
                    textcoords="offset points", ha="left", va="center", fontsize=7, zorder=3)
    ax.set_axis_off()
    if title:
        ax.set_title(title)
    return _save(fig, path)


def class_heatmap(model, classes, path: str, title: str | None = None) -> str:
    """Coordinates of every class member, rows grouped by class."""
    rows, labels = [], []
    for c, D in enumerate(classes):
        for e in D:
            rows.append(list(e[: model.poset.n]))
            labels.append(c)
    fig, ax = plt.subplots(figsize=(max(4, 0.35 * model.poset.n), max(2, 0.25 * len(rows))))
    if rows:
        ax.imshow(rows, aspect="auto", cmap="viridis", interpolation="nearest")
    ax.set_yticks(range(len(rows)))
    ax.set_yticklabels([f"D{c}" for c in labels], fontsize=6)
    ax.set_xticks(range(model.poset.n))
    ax.set_xticklabels([format_address(a) for a in model.poset.nodes], rotation=90, fontsize=6)
    ax.set_title(title or "class coordinates")
    return _save(fig, path)


def bipartite_encoding(R, cm, w, path: str) -> str:
    """The graph as a 0/1 matrix next to the colors on the grid of classes."""
    import numpy as np

    graph = np.zeros((R.rows, R.cols))
    for u, v in R.edges:
        graph[u, v] = 1
    row = {e: n for n, D in enumerate(w.classes[0][: R.rows]) for e in D}
    col = {e: m for m, D in enumerate(w.classes[1][: R.cols]) for e in D}
    grid = np.zeros((R.rows, R.cols))
    for e, c in zip(cm.model.elements, cm.colors):
        if e in row and e in col:
            grid[row[e], col[e]] = c
    fig, (a, b) = plt.subplots(1, 2, figsize=(7, 3.2))
    a.imshow(graph, cmap="Greys", vmin=0, vmax=1)
    a.set_title("graph")
    b.imshow(grid, cmap="coolwarm", vmin=0, vmax=2)
    b.set_title("grid colors (1 edge, 2 non-edge)")
    for ax in (a, b):
        ax.set_xticks(range(R.cols))
        ax.set_yticks(range(R.rows))
        ax.set_xlabel("column class")
        ax.set_ylabel("row class")
    return _save(fig, path)


def acceptance_summary(results, path: str) -> str:
    fig, ax = plt.subplots(figsize=(6, 0.35 * len(results) + 1))
    names = [r.name for r in results]
    ax.barh(names, [r.seconds for r in results], color=["tab:green" if r.passed else "tab:red" for r in results])
    ax.invert_yaxis()
    ax.set_xlabel("seconds")
    ax.set_title("acceptance criteria")
    return _save(fig, path)
