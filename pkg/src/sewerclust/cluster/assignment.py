"""Shared clustering result type and input coercion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError

METHODS = ("kmeans", "hca", "som")


def data_matrix(data) -> np.ndarray:
    """Accept a FeatureMatrix or a plain 2-D array of row vectors.

    A FeatureMatrix must already be scaled; raw matrices mix units and make
    Euclidean distances meaningless.
    """
    scaling = getattr(data, "scaling", None)
    if scaling is not None:
        if scaling == "raw":
            raise DataError("feature matrix must be scaled before clustering")
        data = data.values
    x = np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise DataError("need a non-empty 2-D data matrix")
    if not np.all(np.isfinite(x)):
        raise DataError("data matrix contains non-finite entries")
    return x


def row_ids_of(data, n: int) -> tuple[str, ...]:
    ids = getattr(data, "row_ids", None)
    if ids is not None:
        return tuple(ids)
    return tuple(str(i) for i in range(n))


@dataclass(frozen=True)
class ClusterAssignment:
    """Cluster labels for a set of rows, with method provenance.

    Labels live in [0, k) and every cluster is non-empty. quality carries
    the mean silhouette where it is defined (k >= 2), seed the RNG seed for
    stochastic methods.
    """

    method: str
    labels: np.ndarray
    k: int
    row_ids: tuple[str, ...]
    quality: float | None = None
    seed: int | None = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        object.__setattr__(self, "labels", labels)
        if self.method not in METHODS:
            raise DataError(f"unknown clustering method {self.method!r}")
        if labels.shape != (len(self.row_ids),):
            raise DataError("labels length does not match row ids")
        if self.k < 1:
            raise DataError("k must be at least 1")
        present = np.unique(labels)
        if present.size and (present[0] < 0 or present[-1] >= self.k):
            raise DataError("labels outside [0, k)")
        if present.size != self.k:
            raise DataError("every cluster in [0, k) must be non-empty")
        labels.flags.writeable = False

    @property
    def n_rows(self) -> int:
        return len(self.row_ids)

    def cluster_members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster)


def canonical_order(labels: np.ndarray, k: int) -> np.ndarray:
    """Relabel clusters by first appearance so output is stable across
    seeds that find the same partition: cluster of row 0 becomes 0, the
    next new cluster 1, and so on."""
    labels = np.asarray(labels, dtype=int)
    mapping: dict[int, int] = {}
    for lab in labels:
        if int(lab) not in mapping:
            mapping[int(lab)] = len(mapping)
    if len(mapping) != k:
        raise DataError("labels do not cover k clusters")
    return np.asarray([mapping[int(lab)] for lab in labels], dtype=int)


def letters(labels: np.ndarray) -> list[str]:
    """A, B, C ... names for cluster indices, for report tables."""
    return [chr(ord("A") + int(lab)) for lab in labels]
