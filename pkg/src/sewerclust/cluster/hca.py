"""Agglomerative clustering with Ward linkage.

Cluster distances follow the convention in which the merge height of two
single rows equals their Euclidean distance; squared distances between
clusters are updated with the Lance-Williams recurrence

    d(u, k)^2 = [ (n_i + n_k) d(i, k)^2 + (n_j + n_k) d(j, k)^2
                  - n_k d(i, j)^2 ] / (n_i + n_j + n_k)

after merging i and j into u. Ward linkage is reducible, so merge heights
never decrease. Ties are broken by the smallest (node_a, node_b) pair;
node ids count leaves 0..n-1 first, then one new id per merge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from .assignment import ClusterAssignment, data_matrix, row_ids_of


@dataclass(frozen=True)
class Merge:
    node_a: int
    node_b: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    merges: tuple[Merge, ...]
    leaf_ids: tuple[str, ...]

    def __post_init__(self):
        n = len(self.leaf_ids)
        if len(self.merges) != n - 1:
            raise DataError("a dendrogram over n leaves needs exactly n-1 merges")
        heights = [m.height for m in self.merges]
        if any(h2 < h1 - 1e-12 for h1, h2 in zip(heights, heights[1:])):
            raise DataError("merge heights must be non-decreasing")

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_ids)

    @property
    def d_max(self) -> float:
        return self.merges[-1].height if self.merges else 0.0


@dataclass(frozen=True)
class HcaCut:
    """A dendrogram cut: the assignment plus where the cut fell relative to
    the [D_max/3, 2 D_max/3] rule-of-thumb band."""

    assignment: ClusterAssignment
    cut_height: float
    in_rule_of_thumb_band: bool


def hca_ward(data) -> Dendrogram:
    x = data_matrix(data)
    ids = row_ids_of(data, x.shape[0])
    n = x.shape[0]
    if n < 2:
        raise DataError("hierarchical clustering needs at least 2 rows")

    # active cluster state keyed by node id
    diff = x[:, None, :] - x[None, :, :]
    d2 = {}
    sq = np.einsum("ijd,ijd->ij", diff, diff)
    for i in range(n):
        for j in range(i + 1, n):
            d2[(i, j)] = float(sq[i, j])
    sizes = {i: 1 for i in range(n)}
    active = list(range(n))

    merges: list[Merge] = []
    next_id = n
    for _ in range(n - 1):
        best_pair = None
        best_d2 = np.inf
        for ai in range(len(active)):
            for bi in range(ai + 1, len(active)):
                a, b = active[ai], active[bi]
                key = (a, b) if a < b else (b, a)
                val = d2[key]
                if best_pair is None or val < best_d2 or (val == best_d2 and key < best_pair):
                    best_d2 = val
                    best_pair = key
        a, b = best_pair
        na, nb = sizes[a], sizes[b]
        new = next_id
        next_id += 1
        merges.append(Merge(node_a=a, node_b=b, height=float(np.sqrt(best_d2)),
                            size=na + nb))
        active.remove(a)
        active.remove(b)
        for k in active:
            nk = sizes[k]
            dak = d2[(min(a, k), max(a, k))]
            dbk = d2[(min(b, k), max(b, k))]
            d2[(min(new, k), max(new, k))] = (
                (na + nk) * dak + (nb + nk) * dbk - nk * best_d2) / (na + nb + nk)
        sizes[new] = na + nb
        active.append(new)
    return Dendrogram(merges=tuple(merges), leaf_ids=ids)


def _labels_after_merges(dendrogram: Dendrogram, n_merges: int) -> np.ndarray:
    """Apply the first n_merges merges; label clusters by smallest member."""
    n = dendrogram.n_leaves
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    for step in range(n_merges):
        m = dendrogram.merges[step]
        members[n + step] = members.pop(m.node_a) + members.pop(m.node_b)
    groups = sorted(members.values(), key=min)
    labels = np.empty(n, dtype=int)
    for lab, rows in enumerate(groups):
        labels[rows] = lab
    return labels


def cut_dendrogram(dendrogram: Dendrogram, k: int | None = None,
                   height: float | None = None) -> HcaCut:
    """Cut into k clusters, or at an explicit height.

    Cutting at height h keeps every merge at or below h. For a k cut the
    reported cut height is the midpoint of the gap between the last merge
    applied and the first one undone. The result notes whether that height
    falls inside the rule-of-thumb band [D_max/3, 2 D_max/3].
    """
    n = dendrogram.n_leaves
    d_max = dendrogram.d_max
    if (k is None) == (height is None):
        raise DataError("specify exactly one of k or height")
    if k is not None:
        if not 1 <= k <= n:
            raise DataError(f"k must be within [1, {n}]")
        n_merges = n - k
    else:
        if not 0 < height <= d_max:
            raise DataError(f"cut height must lie in (0, {d_max:.6g}]")
        n_merges = sum(1 for m in dendrogram.merges if m.height <= height)
        k = n - n_merges

    labels = _labels_after_merges(dendrogram, n_merges)
    lower = dendrogram.merges[n_merges - 1].height if n_merges > 0 else 0.0
    upper = dendrogram.merges[n_merges].height if n_merges < n - 1 else d_max
    cut_height = height if height is not None else 0.5 * (lower + upper)
    in_band = d_max / 3.0 <= cut_height <= 2.0 * d_max / 3.0
    assignment = ClusterAssignment(method="hca", labels=labels, k=k,
                                   row_ids=dendrogram.leaf_ids, quality=None,
                                   seed=None)
    return HcaCut(assignment=assignment, cut_height=float(cut_height),
                  in_rule_of_thumb_band=bool(in_band))


def to_newick(dendrogram: Dendrogram) -> str:
    """Newick-style rendering with merge heights as node depths."""
    n = dendrogram.n_leaves
    height = {i: 0.0 for i in range(n)}
    text = {i: str(dendrogram.leaf_ids[i]) for i in range(n)}
    for step, m in enumerate(dendrogram.merges):
        node = n + step
        height[node] = m.height
        la = m.height - height[m.node_a]
        lb = m.height - height[m.node_b]
        text[node] = f"({text[m.node_a]}:{la:.12g},{text[m.node_b]}:{lb:.12g})"
    root = n + len(dendrogram.merges) - 1 if dendrogram.merges else 0
    return text[root] + ";"


def dendrogram_to_dict(dendrogram: Dendrogram) -> dict:
    return {
        "leaf_ids": list(dendrogram.leaf_ids),
        "merges": [[m.node_a, m.node_b, m.height, m.size] for m in dendrogram.merges],
    }


def dendrogram_from_dict(doc: dict) -> Dendrogram:
    merges = tuple(Merge(node_a=int(a), node_b=int(b), height=float(h), size=int(s))
                   for a, b, h, s in doc["merges"])
    return Dendrogram(merges=merges, leaf_ids=tuple(str(v) for v in doc["leaf_ids"]))
