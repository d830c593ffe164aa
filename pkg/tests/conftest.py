import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # oracles / synthetic helpers

from sewerclust.features import FeatureMatrix, scale


def planted_blobs(seed: int, sizes=(2, 5, 5, 5), d: int = 3, sep: float = 15.0,
                  std: float = 1.0):
    """Well-separated Gaussian blobs; returns (points, planted labels).

    Centres sit at the origin and along the axes at distance `sep`, so the
    smallest centre distance is sep (>= 10 std for the defaults).
    """
    rng = np.random.default_rng(seed)
    centers = np.zeros((len(sizes), d))
    for c in range(1, len(sizes)):
        centers[c, (c - 1) % d] = sep
    points, labels = [], []
    for c, size in enumerate(sizes):
        points.append(centers[c] + rng.normal(0.0, std, (size, d)))
        labels += [c] * size
    return np.vstack(points), np.asarray(labels)


def as_feature_matrix(values: np.ndarray, scaling: str | None = "zscore",
                      ids=None, columns=None) -> FeatureMatrix:
    """Wrap a plain array as a (optionally scaled) FeatureMatrix."""
    values = np.asarray(values, dtype=float)
    n, d = values.shape
    ids = tuple(ids) if ids is not None else tuple(str(i + 1) for i in range(n))
    columns = tuple(columns) if columns is not None else tuple(f"F{j + 1}" for j in range(d))
    raw = FeatureMatrix(row_ids=ids, column_names=columns, values=values, scaling="raw")
    if scaling is None:
        return raw
    return scale(raw, scaling)


@pytest.fixture
def blobs17():
    x, labels = planted_blobs(seed=42)
    return x, labels


@pytest.fixture
def synthetic_dataset(tmp_path):
    from synthetic import make_dataset

    root = tmp_path / "data"
    planted = make_dataset(root)
    return root, planted
