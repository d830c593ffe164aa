"""k-means clustering with silhouette scoring and silhouette-guided
selection of the cluster count.

The solver runs Lloyd iterations from distance-weighted seeding, then a
single-point refinement pass: while any one-row reassignment would lower
the within-cluster sum of squares, the best such move is applied. The
returned solution is therefore locally optimal under single-point moves,
which also implies every row sits with its nearest centroid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from .assignment import ClusterAssignment, data_matrix, row_ids_of

DEFAULT_RESTARTS = 20
DEFAULT_MAX_ITER = 300
_IMPROVEMENT_EPS = 1e-12


@dataclass(frozen=True)
class KMeansState:
    """Converged k-means solution (best restart by SSE)."""

    centroids: np.ndarray
    labels: np.ndarray
    sse: float
    iterations: int
    seed: int
    restarts: int
    sse_history: tuple[float, ...]  # per accepted step of the winning restart

    def __post_init__(self):
        for name in ("centroids", "labels"):
            arr = np.asarray(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def _sq_distances(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """(n, k) squared Euclidean distances."""
    diff = x[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _seed_centroids(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Distance-weighted (k-means++ style) seeding; falls back to the lowest
    unchosen index when all remaining distances are zero (duplicates)."""
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    while len(chosen) < k:
        total = d2.sum()
        if total <= 0:
            for i in range(n):
                if i not in chosen:
                    chosen.append(i)
                    break
            else:  # fewer distinct rows than k: reuse row 0
                chosen.append(0)
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), r, side="right"))
            idx = min(idx, n - 1)
            chosen.append(idx)
        d2 = np.minimum(d2, np.sum((x - x[chosen[-1]]) ** 2, axis=1))
    return x[np.asarray(chosen)].copy()


def _assign(x, centroids):
    d2 = _sq_distances(x, centroids)
    labels = np.argmin(d2, axis=1)  # ties resolve to the lowest index
    return labels, d2


def _repair_empty(x, centroids, labels, d2):
    """Reseed each empty cluster at the point farthest from its own
    centroid (ties to the lowest row index)."""
    k = centroids.shape[0]
    for c in range(k):
        if np.any(labels == c):
            continue
        own = d2[np.arange(x.shape[0]), labels]
        far = int(np.argmax(own))
        centroids[c] = x[far]
        labels, d2 = _assign(x, centroids)
    return centroids, labels, d2


def _recompute_centroids(x, labels, k):
    centroids = np.empty((k, x.shape[1]))
    for c in range(k):
        centroids[c] = x[labels == c].mean(axis=0)
    return centroids


def _sse_of(x, centroids, labels):
    return float(np.sum((x - centroids[labels]) ** 2))


def _refine_single_moves(x, labels, k, history):
    """Apply SSE-improving single-point reassignments until none remain.

    The SSE change of moving row i from cluster c (size n_c > 1) to c' is
        n_c' / (n_c' + 1) * d(i, mu_c')^2  -  n_c / (n_c - 1) * d(i, mu_c)^2
    Each applied move strictly lowers the SSE, so the loop terminates.
    """
    n = x.shape[0]
    while True:
        centroids = _recompute_centroids(x, labels, k)
        d2 = _sq_distances(x, centroids)
        counts = np.bincount(labels, minlength=k)
        own = counts[labels]
        removable = own > 1  # a move may not empty its source cluster
        gain = d2 * (counts / (counts + 1.0))[None, :]
        loss = (own / np.maximum(own - 1.0, 1.0)) * d2[np.arange(n), labels]
        delta = gain - loss[:, None]
        delta[np.arange(n), labels] = np.inf
        delta[~removable] = np.inf
        best = np.unravel_index(np.argmin(delta), delta.shape)
        if delta[best] >= -_IMPROVEMENT_EPS:
            return labels, centroids, d2
        labels = labels.copy()
        labels[best[0]] = best[1]
        history.append(_sse_of(x, _recompute_centroids(x, labels, k), labels))


def _run_once(x, k, rng):
    centroids = _seed_centroids(x, k, rng)
    labels, d2 = _assign(x, centroids)
    centroids, labels, d2 = _repair_empty(x, centroids, labels, d2)
    history = [_sse_of(x, centroids, labels)]
    iterations = 0
    for _ in range(DEFAULT_MAX_ITER):
        iterations += 1
        centroids = _recompute_centroids(x, labels, k)
        new_labels, d2 = _assign(x, centroids)
        centroids, new_labels, d2 = _repair_empty(x, centroids, new_labels, d2)
        sse = _sse_of(x, centroids, new_labels)
        if sse > history[-1] + 1e-9:
            raise AssertionError("k-means SSE increased within a restart")
        history.append(sse)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    labels, centroids, d2 = _refine_single_moves(x, labels, k, history)
    centroids = _recompute_centroids(x, labels, k)
    return centroids, labels, _sse_of(x, centroids, labels), iterations, history


def kmeans(data, k: int, seed: int, restarts: int = DEFAULT_RESTARTS) -> KMeansState:
    """Best of `restarts` seeded k-means runs (restart r uses seed + r).

    k = n is allowed and yields zero SSE; k below 2 or above n is an error.
    """
    x = data_matrix(data)
    n = x.shape[0]
    if k < 2:
        raise DataError("k must be at least 2")
    if k > n:
        raise DataError(f"k = {k} exceeds the {n} data rows")
    if restarts < 1:
        raise DataError("restarts must be at least 1")

    best = None
    for r in range(restarts):
        rng = np.random.default_rng(seed + r)
        centroids, labels, sse, iterations, history = _run_once(x, k, rng)
        if best is None or sse < best[2] - _IMPROVEMENT_EPS:
            best = (centroids, labels, sse, iterations, history)
    centroids, labels, sse, iterations, history = best
    state = KMeansState(centroids=centroids, labels=labels, sse=sse,
                        iterations=iterations, seed=seed, restarts=restarts,
                        sse_history=tuple(history))
    _check_converged(x, state)
    return state


def _check_converged(x, state: KMeansState) -> None:
    """Invariants asserted on every returned solution: centroids are the
    means of their members and no single-point move lowers the SSE."""
    k = state.centroids.shape[0]
    for c in range(k):
        members = x[state.labels == c]
        if members.size == 0 or not np.allclose(state.centroids[c], members.mean(axis=0),
                                                atol=1e-9):
            raise AssertionError("centroid is not the mean of its cluster")
    d2 = _sq_distances(x, state.centroids)
    counts = np.bincount(state.labels, minlength=k)
    own = counts[state.labels]
    gain = d2 * (counts / (counts + 1.0))[None, :]
    loss = (own / np.maximum(own - 1.0, 1.0)) * d2[np.arange(x.shape[0]), state.labels]
    delta = gain - loss[:, None]
    delta[np.arange(x.shape[0]), state.labels] = np.inf
    delta[own <= 1] = np.inf
    if np.min(delta) < -1e-9:
        raise AssertionError("a single-point reassignment would lower the SSE")


def silhouette(data, labels) -> tuple[np.ndarray, float]:
    """Per-row silhouette values and their mean.

    s(i) = (b(i) - a(i)) / max(a(i), b(i)) with Euclidean distances, where
    a(i) averages within the own cluster and b(i) is the smallest average
    to any other cluster. Rows alone in their cluster get s(i) = 0. Fails
    when a row coincides with both its own and the nearest foreign cluster
    (a = b = 0: degenerate data).
    """
    x = data_matrix(data)
    labels = np.asarray(labels, dtype=int)
    n = x.shape[0]
    if labels.shape != (n,):
        raise DataError("labels length does not match data rows")
    clusters = np.unique(labels)
    if clusters.size < 2:
        raise DataError("silhouette needs at least 2 clusters")
    if clusters[0] < 0 or clusters[-1] >= clusters.size:
        raise DataError("empty cluster: labels must cover [0, k)")

    diff = x[:, None, :] - x[None, :, :]
    dist = np.sqrt(np.einsum("ijd,ijd->ij", diff, diff))
    s = np.zeros(n)
    counts = {int(c): int(np.sum(labels == c)) for c in clusters}
    for i in range(n):
        c = int(labels[i])
        if counts[c] == 1:
            s[i] = 0.0
            continue
        a = dist[i, labels == c].sum() / (counts[c] - 1)
        b = min(dist[i, labels == other].mean() for other in clusters if other != c)
        m = max(a, b)
        if m == 0:
            raise DataError("degenerate data: coincident rows across clusters")
        s[i] = (b - a) / m
    return s, float(s.mean())


@dataclass(frozen=True)
class KSelection:
    best_k: int
    scores: tuple[tuple[int, float], ...]  # (k, mean silhouette)
    seed: int


def select_k(data, k_range=range(2, 9), seed: int = 0,
             restarts: int = DEFAULT_RESTARTS) -> KSelection:
    """Pick the cluster count with the highest mean silhouette.

    Runs k-means for every k in k_range and scores each solution; ties go
    to the smaller k (strict-improvement argmax over increasing k).
    """
    x = data_matrix(data)
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise DataError("empty k range")
    if ks[0] < 2 or ks[-1] > x.shape[0] - 1:
        raise DataError(f"k range must lie within [2, {x.shape[0] - 1}]")

    scores = []
    best_k, best_sc = None, -np.inf
    for k in ks:
        state = kmeans(x, k, seed=seed, restarts=restarts)
        _, sc = silhouette(x, state.labels)
        scores.append((k, sc))
        if sc > best_sc:
            best_k, best_sc = k, sc
    return KSelection(best_k=best_k, scores=tuple(scores), seed=seed)


def kmeans_assignment(data, k: int, seed: int,
                      restarts: int = DEFAULT_RESTARTS) -> tuple[ClusterAssignment, KMeansState]:
    """kmeans() plus packaging into a ClusterAssignment with silhouette
    quality and first-appearance canonical labels."""
    from .assignment import canonical_order

    x = data_matrix(data)
    state = kmeans(x, k, seed=seed, restarts=restarts)
    labels = canonical_order(state.labels, k)
    _, sc = silhouette(x, labels)
    assignment = ClusterAssignment(method="kmeans", labels=labels, k=k,
                                   row_ids=row_ids_of(data, x.shape[0]),
                                   quality=sc, seed=seed)
    return assignment, state
