"""SVG rendering of the analysis artifacts.

All figures go to self-contained SVG files. Hash salt and metadata are
pinned so identical inputs produce byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "sewerclust"

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import RegularPolygon

from .cluster.hca import Dendrogram
from .cluster.som import SomGrid
from .pca import PcaResult
from .wavelet import WaveletSpectrum


def _save(fig, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_wavelet_spectrum(spectrum: WaveletSpectrum, path, title: str = "") -> None:
    """Heatmap of |W(a, b)| over time and scale, log scale axis."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    power = np.abs(spectrum.coefficients)
    mesh = ax.pcolormesh(spectrum.times, spectrum.scales, power, shading="auto",
                         cmap="viridis", rasterized=True)
    ax.set_yscale("log")
    ax.set_xlabel("time (h)")
    ax.set_ylabel("scale (h)")
    if title:
        ax.set_title(title)
    fig.colorbar(mesh, ax=ax, label="|coefficient|")
    _save(fig, path)


def plot_variance_curve(scales, variance, path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(scales, variance, color="tab:blue")
    ax.set_xscale("log")
    ax.set_xlabel("scale (h)")
    ax.set_ylabel("wavelet variance")
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_sc_vs_k(scores, path) -> None:
    """Mean silhouette against cluster count."""
    ks = [k for k, _ in scores]
    scs = [sc for _, sc in scores]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ks, scs, marker="o", color="tab:blue")
    best = ks[int(np.argmax(scs))]
    ax.axvline(best, color="tab:red", linestyle="--", linewidth=1)
    ax.set_xlabel("number of clusters")
    ax.set_ylabel("mean silhouette")
    ax.set_xticks(ks)
    _save(fig, path)


def plot_dendrogram(dendrogram: Dendrogram, path) -> None:
    """Classic bracket dendrogram, leaves ordered to avoid crossings."""
    n = dendrogram.n_leaves
    children: dict[int, tuple[int, int]] = {}
    for step, m in enumerate(dendrogram.merges):
        children[n + step] = (m.node_a, m.node_b)

    order: list[int] = []

    def collect(node: int) -> None:
        if node < n:
            order.append(node)
        else:
            a, b = children[node]
            collect(a)
            collect(b)

    root = n + len(dendrogram.merges) - 1
    collect(root)
    xpos = {leaf: i for i, leaf in enumerate(order)}
    height = {i: 0.0 for i in range(n)}

    fig, ax = plt.subplots(figsize=(max(6, 0.5 * n), 4.5))
    for step, m in enumerate(dendrogram.merges):
        node = n + step
        xa, xb = xpos[m.node_a], xpos[m.node_b]
        ha, hb = height[m.node_a], height[m.node_b]
        ax.plot([xa, xa, xb, xb], [ha, m.height, m.height, hb], color="tab:blue", lw=1.2)
        xpos[node] = 0.5 * (xa + xb)
        height[node] = m.height
    ax.set_xticks(range(n))
    ax.set_xticklabels([dendrogram.leaf_ids[leaf] for leaf in order], rotation=90)
    ax.set_ylabel("merge height")
    _save(fig, path)


def _hex_axes(grid: SomGrid, values, fig, ax, cmap: str, label: str):
    vmin, vmax = float(np.min(values)), float(np.max(values))
    span = vmax - vmin if vmax > vmin else 1.0
    mapper = plt.get_cmap(cmap)
    for i, (x, y) in enumerate(grid.coords):
        color = mapper((values[i] - vmin) / span)
        ax.add_patch(RegularPolygon((x, y), numVertices=6, radius=0.57,
                                    orientation=0.0, facecolor=color,
                                    edgecolor="white", linewidth=0.8))
    ax.set_xlim(-1, grid.cols + 1)
    ax.set_ylim(-1, grid.rows * np.sqrt(3) / 2 + 1)
    ax.set_aspect("equal")
    ax.axis("off")
    sm = plt.cm.ScalarMappable(cmap=mapper,
                               norm=plt.Normalize(vmin=vmin, vmax=vmax))
    fig.colorbar(sm, ax=ax, label=label, shrink=0.8)


def plot_som_hits(grid: SomGrid, path) -> None:
    """Hexagon map with the number of samples landing on each neuron."""
    fig, ax = plt.subplots(figsize=(1.2 * grid.cols, 1.2 * grid.rows))
    _hex_axes(grid, grid.hits.astype(float), fig, ax, "Blues", "hits")
    for i, (x, y) in enumerate(grid.coords):
        if grid.hits[i]:
            ax.text(x, y, str(int(grid.hits[i])), ha="center", va="center", fontsize=9)
    _save(fig, path)


def plot_som_umatrix(grid: SomGrid, path) -> None:
    """Neighbour-weight-distance map; darker cells sit on cluster borders."""
    fig, ax = plt.subplots(figsize=(1.2 * grid.cols, 1.2 * grid.rows))
    _hex_axes(grid, grid.umatrix(), fig, ax, "copper_r", "mean neighbour distance")
    _save(fig, path)


def plot_pca_biplot(result: PcaResult, pc_x: int, pc_y: int, path,
                    labels=None) -> None:
    """Scores scatter with loading arrows for two components (0-based)."""
    fig, ax = plt.subplots(figsize=(6.5, 6))
    xs = result.scores[:, pc_x]
    ys = result.scores[:, pc_y]
    colors = None
    if labels is not None:
        cmap = plt.get_cmap("tab10")
        colors = [cmap(int(lab) % 10) for lab in labels]
    ax.scatter(xs, ys, c=colors, s=40, edgecolor="black", linewidth=0.5, zorder=3)
    for cid, x, y in zip(result.row_ids, xs, ys):
        ax.annotate(cid, (x, y), textcoords="offset points", xytext=(4, 4), fontsize=8)
    arrow_scale = 0.9 * max(np.abs(xs).max(), np.abs(ys).max(), 1e-9)
    for name, lx, ly in zip(result.column_names, result.loadings[:, pc_x],
                            result.loadings[:, pc_y]):
        ax.annotate("", xy=(lx * arrow_scale, ly * arrow_scale), xytext=(0, 0),
                    arrowprops=dict(arrowstyle="->", color="tab:red", lw=0.8))
        ax.annotate(name, (lx * arrow_scale, ly * arrow_scale), fontsize=7,
                    color="tab:red")
    ax.axhline(0, color="grey", lw=0.5)
    ax.axvline(0, color="grey", lw=0.5)
    ax.set_xlabel(f"{result.pc_name(pc_x)} ({result.explained[pc_x]:.0%})")
    ax.set_ylabel(f"{result.pc_name(pc_y)} ({result.explained[pc_y]:.0%})")
    _save(fig, path)


def plot_score_bars(result: PcaResult, path, n_pcs: int = 4, labels=None) -> None:
    """Per-row component scores as grouped bars, one panel per component."""
    n_pcs = min(n_pcs, result.n_components)
    fig, axes = plt.subplots(n_pcs, 1, figsize=(max(6, 0.45 * len(result.row_ids)),
                                                2.0 * n_pcs), sharex=True)
    if n_pcs == 1:
        axes = [axes]
    x = np.arange(len(result.row_ids))
    cmap = plt.get_cmap("tab10")
    for j, ax in enumerate(axes):
        if labels is not None:
            colors = [cmap(int(lab) % 10) for lab in labels]
        else:
            colors = "tab:blue"
        ax.bar(x, result.scores[:, j], color=colors)
        ax.axhline(0, color="grey", lw=0.5)
        ax.set_ylabel(result.pc_name(j))
    axes[-1].set_xticks(x)
    axes[-1].set_xticklabels(result.row_ids, rotation=90)
    _save(fig, path)
