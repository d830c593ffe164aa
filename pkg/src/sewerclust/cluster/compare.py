"""Cross-method comparison: optimal label matching and agreement scores."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from ..errors import DataError
from .assignment import ClusterAssignment

_MAX_EXHAUSTIVE_K = 8


@dataclass(frozen=True)
class AlignmentResult:
    relabeled: ClusterAssignment
    agreement: float           # matched rows / n under the best mapping
    ari: float                 # adjusted Rand index (mapping-independent)
    mapping: tuple[int, ...]   # mapping[old_label] = new_label


def contingency(a: np.ndarray, b: np.ndarray, ka: int, kb: int) -> np.ndarray:
    table = np.zeros((ka, kb), dtype=int)
    for i, j in zip(a, b):
        table[int(i), int(j)] += 1
    return table


def adjusted_rand_index(a, b) -> float:
    """Chance-corrected pair-counting agreement between two labelings."""
    a = np.asarray(a, dtype=int)
    b = np.asarray(b, dtype=int)
    if a.shape != b.shape:
        raise DataError("labelings must have equal length")
    n = a.size
    table = contingency(a, b, int(a.max()) + 1, int(b.max()) + 1)
    sum_cells = sum(comb(int(v), 2) for v in table.ravel())
    sum_rows = sum(comb(int(v), 2) for v in table.sum(axis=1))
    sum_cols = sum(comb(int(v), 2) for v in table.sum(axis=0))
    pairs = comb(n, 2)
    expected = sum_rows * sum_cols / pairs if pairs else 0.0
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0 if sum_cells == expected else 0.0
    return float((sum_cells - expected) / (max_index - expected))


def align_labels(reference: ClusterAssignment,
                 other: ClusterAssignment) -> AlignmentResult:
    """Relabel `other` so its clusters match `reference` as well as a
    one-to-one mapping allows.

    The mapping is found exhaustively over label permutations (cluster
    counts up to 8), maximising the diagonal of the contingency table; ties
    resolve to the lexicographically smallest permutation. Both assignments
    must cover the same rows with the same cluster count.
    """
    if reference.row_ids != other.row_ids:
        raise DataError("assignments cover different row sets")
    if reference.k != other.k:
        raise DataError(
            f"cluster counts differ ({reference.k} vs {other.k}); "
            "one-to-one alignment needs equal k")
    k = reference.k
    if k > _MAX_EXHAUSTIVE_K:
        raise DataError(f"alignment supports up to {_MAX_EXHAUSTIVE_K} clusters")

    table = contingency(other.labels, reference.labels, k, k)
    best_perm = None
    best_matched = -1
    for perm in itertools.permutations(range(k)):
        matched = sum(int(table[i, perm[i]]) for i in range(k))
        if matched > best_matched:
            best_matched = matched
            best_perm = perm

    mapping = tuple(best_perm)
    new_labels = np.asarray([mapping[int(lab)] for lab in other.labels], dtype=int)
    relabeled = ClusterAssignment(method=other.method, labels=new_labels, k=k,
                                  row_ids=other.row_ids, quality=other.quality,
                                  seed=other.seed)
    n = reference.n_rows
    return AlignmentResult(
        relabeled=relabeled,
        agreement=best_matched / n,
        ari=adjusted_rand_index(reference.labels, other.labels),
        mapping=mapping)
