"""Self-organizing map on a hexagonal lattice.

Training is sequential (one sample per step) over epochs * n steps, with
the learning rate decaying linearly from 0.5 to 0.01 and the Gaussian
neighbourhood radius linearly from max(rows, cols) / 2 to 1. Lattice
geometry uses offset hex coordinates, so each interior node has exactly
six neighbours at unit distance; the neighbourhood function measures
Euclidean distance in that hex plane.

Cluster extraction runs k-means over the neuron weight vectors and lets
every sample inherit the cluster of its best-matching unit; the
neighbour-weight-distance map (U-matrix edges) is kept for visual
confirmation of the boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from .assignment import ClusterAssignment, canonical_order, data_matrix, row_ids_of
from .kmeans import DEFAULT_RESTARTS, kmeans

DEFAULT_EPOCHS = 200
_ALPHA_START, _ALPHA_END = 0.5, 0.01
_RADIUS_END = 1.0


def som_grid_size(n_samples: int) -> tuple[int, int]:
    """Lattice dimensions for n samples.

    The node budget is floor(5 * sqrt(n)); it is factored into the most
    nearly square (rows, cols) pair with rows <= cols and rows * cols
    covering the budget: rows = floor(sqrt(budget)), cols = ceil(budget /
    rows). 17 samples give a 4 x 5 lattice.
    """
    if n_samples < 4:
        raise DataError("SOM sizing needs at least 4 samples")
    budget = int(math.floor(5.0 * math.sqrt(n_samples)))
    rows = int(math.floor(math.sqrt(budget)))
    cols = int(math.ceil(budget / rows))
    return rows, cols


def hex_coordinates(rows: int, cols: int) -> np.ndarray:
    """Offset-row hex plane positions, unit distance between neighbours."""
    coords = np.empty((rows * cols, 2))
    for r in range(rows):
        for c in range(cols):
            coords[r * cols + c] = (c + 0.5 * (r % 2), r * math.sqrt(3.0) / 2.0)
    return coords


@dataclass(frozen=True)
class SomGrid:
    """Trained map: prototype weights plus the sample-to-neuron mapping."""

    rows: int
    cols: int
    weights: np.ndarray        # (rows * cols, d)
    hits: np.ndarray           # (rows * cols,) samples per neuron
    bmu: np.ndarray            # (n,) best-matching unit per sample
    coords: np.ndarray         # (rows * cols, 2) hex plane positions
    edges: np.ndarray          # (E, 2) adjacent neuron index pairs
    edge_distances: np.ndarray  # (E,) Euclidean weight distance per edge
    quantization_errors: np.ndarray  # per epoch, starting before training
    degenerate: bool
    seed: int
    epochs: int

    def __post_init__(self):
        for name in ("weights", "hits", "bmu", "coords", "edges",
                     "edge_distances", "quantization_errors"):
            arr = np.asarray(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if int(self.hits.sum()) != self.bmu.size:
            raise DataError("hit counts must total the number of samples")

    @property
    def n_nodes(self) -> int:
        return self.rows * self.cols

    @property
    def quantization_error(self) -> float:
        return float(self.quantization_errors[-1])

    @property
    def qe_monotone_over_phases(self) -> bool:
        """True when the final quantization error does not exceed the value
        at the coarse-to-fine boundary (half of the epochs)."""
        qe = self.quantization_errors
        return bool(qe[-1] <= qe[len(qe) // 2] + 1e-12)

    def umatrix(self) -> np.ndarray:
        """Per-neuron mean distance to its lattice neighbours."""
        total = np.zeros(self.n_nodes)
        count = np.zeros(self.n_nodes)
        for (i, j), d in zip(self.edges, self.edge_distances):
            total[i] += d
            total[j] += d
            count[i] += 1
            count[j] += 1
        return total / np.maximum(count, 1)


def _bmu_of(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - weights[None, :, :]
    return np.argmin(np.einsum("npd,npd->np", diff, diff), axis=1)


def som_train(data, rows: int, cols: int, seed: int,
              epochs: int = DEFAULT_EPOCHS) -> SomGrid:
    """Train a hexagonal SOM; identical seeds give bit-identical grids.

    Weights start uniformly within each feature's observed range. A matrix
    whose rows are all identical is flagged degenerate but still trained.
    """
    x = data_matrix(data)
    n, d = x.shape
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise DataError("lattice needs at least 2 nodes")
    if epochs < 1:
        raise DataError("epochs must be at least 1")

    degenerate = bool(np.all(x == x[0]))
    rng = np.random.default_rng(seed)
    lo, hi = x.min(axis=0), x.max(axis=0)
    weights = rng.uniform(0.0, 1.0, size=(rows * cols, d)) * (hi - lo) + lo

    coords = hex_coordinates(rows, cols)
    cdiff = coords[:, None, :] - coords[None, :, :]
    lattice_d2 = np.einsum("pqc,pqc->pq", cdiff, cdiff)

    radius_start = max(rows, cols) / 2.0
    total_steps = epochs * n
    qe = [float(np.mean(np.linalg.norm(x - weights[_bmu_of(x, weights)], axis=1)))]

    step = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        for idx in order:
            frac = step / max(total_steps - 1, 1)
            alpha = _ALPHA_START + (_ALPHA_END - _ALPHA_START) * frac
            radius = radius_start + (_RADIUS_END - radius_start) * frac
            sample = x[idx]
            diff = sample - weights
            bmu = int(np.argmin(np.einsum("pd,pd->p", diff, diff)))
            influence = alpha * np.exp(-lattice_d2[bmu] / (2.0 * radius * radius))
            weights += influence[:, None] * diff
            step += 1
        qe.append(float(np.mean(np.linalg.norm(x - weights[_bmu_of(x, weights)], axis=1))))

    bmu = _bmu_of(x, weights)
    hits = np.bincount(bmu, minlength=rows * cols)

    edges = []
    for i in range(rows * cols):
        for j in range(i + 1, rows * cols):
            if abs(lattice_d2[i, j] - 1.0) < 1e-9:
                edges.append((i, j))
    edges = np.asarray(edges, dtype=int)
    edge_distances = np.linalg.norm(weights[edges[:, 0]] - weights[edges[:, 1]], axis=1)

    return SomGrid(rows=rows, cols=cols, weights=weights, hits=hits, bmu=bmu,
                   coords=coords, edges=edges, edge_distances=edge_distances,
                   quantization_errors=np.asarray(qe), degenerate=degenerate,
                   seed=seed, epochs=epochs)


def som_clusters(grid: SomGrid, data, k: int, seed: int,
                 restarts: int = DEFAULT_RESTARTS) -> ClusterAssignment:
    """Group neurons with k-means and let samples inherit their BMU's group.

    If some group captures no samples the grouping is repeated with one
    cluster fewer until every sample-level cluster is occupied.
    """
    x = data_matrix(data)
    if x.shape[0] != grid.bmu.size:
        raise DataError("data rows do not match the trained grid")
    occupied = int(np.unique(grid.bmu).size)
    if k < 2:
        raise DataError("k must be at least 2")
    if k > occupied:
        raise DataError(f"k = {k} exceeds the {occupied} occupied neurons")

    for k_try in range(k, 1, -1):
        state = kmeans(grid.weights, k_try, seed=seed, restarts=restarts)
        sample_labels = state.labels[grid.bmu]
        if np.unique(sample_labels).size == k_try:
            labels = canonical_order(sample_labels, k_try)
            from .kmeans import silhouette

            _, sc = silhouette(x, labels) if k_try >= 2 else (None, None)
            return ClusterAssignment(method="som", labels=labels, k=k_try,
                                     row_ids=row_ids_of(data, x.shape[0]),
                                     quality=sc, seed=seed)
    raise DataError("degenerate data: could not form 2 occupied clusters")


def grid_to_dict(grid: SomGrid) -> dict:
    return {
        "rows": grid.rows,
        "cols": grid.cols,
        "weights": grid.weights.tolist(),
        "hits": grid.hits.tolist(),
        "bmu": grid.bmu.tolist(),
        "edges": grid.edges.tolist(),
        "edge_distances": grid.edge_distances.tolist(),
        "quantization_errors": grid.quantization_errors.tolist(),
        "degenerate": grid.degenerate,
        "seed": grid.seed,
        "epochs": grid.epochs,
    }


def grid_from_dict(doc: dict) -> SomGrid:
    rows, cols = int(doc["rows"]), int(doc["cols"])
    return SomGrid(rows=rows, cols=cols,
                   weights=np.asarray(doc["weights"], dtype=float),
                   hits=np.asarray(doc["hits"], dtype=int),
                   bmu=np.asarray(doc["bmu"], dtype=int),
                   coords=hex_coordinates(rows, cols),
                   edges=np.asarray(doc["edges"], dtype=int),
                   edge_distances=np.asarray(doc["edge_distances"], dtype=float),
                   quantization_errors=np.asarray(doc["quantization_errors"], dtype=float),
                   degenerate=bool(doc["degenerate"]),
                   seed=int(doc["seed"]), epochs=int(doc["epochs"]))
