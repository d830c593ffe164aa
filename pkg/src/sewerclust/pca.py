"""Principal component analysis of the scaled feature matrix, loading
summaries, per-cluster scores, and rule-based priority ranking."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .cluster.assignment import ClusterAssignment, letters
from .errors import DataError
from .features import FeatureMatrix

DEFAULT_N_PCS = 4


@dataclass(frozen=True)
class PcaResult:
    """Loadings (columns are components, unit norm), row scores, and the
    explained-variance ratios, which are non-increasing and sum to one over
    the retained components."""

    loadings: np.ndarray       # (d, p)
    scores: np.ndarray         # (n, p)
    explained: np.ndarray      # (p,)
    column_names: tuple[str, ...]
    row_ids: tuple[str, ...]
    degenerate_pairs: tuple[int, ...] = ()  # component indices with tied variance

    def __post_init__(self):
        for name in ("loadings", "scores", "explained"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_components(self) -> int:
        return self.loadings.shape[1]

    def pc_name(self, j: int) -> str:
        return f"PC-{j + 1}"


def pca(matrix: FeatureMatrix) -> PcaResult:
    """Decompose the z-scored feature matrix (correlation-style PCA).

    Computed through an SVD of the centred data; the variance denominator
    is n - 1 to match the scaling convention. The number of retained
    components is min(n - 1, d), which covers the full rank of centred
    data. Sign convention: the largest-magnitude entry of every loading
    column is positive, making repeated runs bit-identical.
    """
    if matrix.scaling != "zscore":
        raise DataError("PCA expects a zscore-scaled matrix")
    x = matrix.values
    n, d = x.shape
    if n < 2:
        raise DataError("PCA needs at least 2 rows")

    centered = x - x.mean(axis=0)
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    p = min(n - 1, d)
    svals = svals[:p]
    loadings = vt[:p].T.copy()

    eig = svals ** 2 / (n - 1)
    order = _stable_order(eig)
    eig = eig[order]
    loadings = loadings[:, order]

    # sign convention: dominant entry of each column positive
    for j in range(p):
        col = loadings[:, j]
        lead = int(np.argmax(np.abs(col)))
        if col[lead] < 0:
            loadings[:, j] = -col

    scores = centered @ loadings
    total = eig.sum()
    explained = eig / total if total > 0 else np.zeros(p)
    ties = tuple(int(j) for j in range(p - 1) if eig[j] == eig[j + 1] and eig[j] > 0)
    return PcaResult(loadings=loadings, scores=scores, explained=explained,
                     column_names=matrix.column_names, row_ids=matrix.row_ids,
                     degenerate_pairs=ties)


def _stable_order(eig: np.ndarray) -> np.ndarray:
    """Descending eigenvalue order; exact ties keep their original
    position, which the sign convention then makes reproducible."""
    return np.argsort(-eig, kind="stable")


@dataclass(frozen=True)
class PcExtremes:
    pc_index: int
    positive: tuple[str, float] | None  # highest positive loading
    negative: tuple[str, float] | None  # lowest negative loading


def loading_extremes(result: PcaResult, n_pcs: int = DEFAULT_N_PCS) -> list[PcExtremes]:
    """Per component: the attribute with the highest positive loading and
    the one with the lowest negative loading (None when absent)."""
    if n_pcs > result.n_components:
        raise DataError(f"only {result.n_components} components available")
    out = []
    for j in range(n_pcs):
        col = result.loadings[:, j]
        hi = int(np.argmax(col))
        lo = int(np.argmin(col))
        positive = (result.column_names[hi], float(col[hi])) if col[hi] > 0 else None
        negative = (result.column_names[lo], float(col[lo])) if col[lo] < 0 else None
        out.append(PcExtremes(pc_index=j, positive=positive, negative=negative))
    return out


@dataclass(frozen=True)
class ClusterScores:
    cluster_ids: tuple[int, ...]
    means: np.ndarray  # (k, n_pcs)
    n_pcs: int

    def __post_init__(self):
        arr = np.asarray(self.means, dtype=float)
        arr.flags.writeable = False
        object.__setattr__(self, "means", arr)


def cluster_scores(result: PcaResult, assignment: ClusterAssignment,
                   n_pcs: int = DEFAULT_N_PCS) -> ClusterScores:
    """Mean component scores of each cluster's members."""
    if tuple(assignment.row_ids) != tuple(result.row_ids):
        raise DataError("assignment and PCA cover different rows")
    if n_pcs > result.n_components:
        raise DataError(f"only {result.n_components} components available")
    means = np.empty((assignment.k, n_pcs))
    for c in range(assignment.k):
        members = assignment.cluster_members(c)
        means[c] = result.scores[members, :n_pcs].mean(axis=0)
    return ClusterScores(cluster_ids=tuple(range(assignment.k)), means=means,
                         n_pcs=n_pcs)


@dataclass(frozen=True)
class PriorityRule:
    """Signed component weights encoding what makes a cluster a good
    control candidate, with the reasoning spelled out as text."""

    weights: dict[int, float]  # component index -> weight
    rationale: str = ""

    def __post_init__(self):
        if not any(w != 0 for w in self.weights.values()):
            raise DataError("priority rule needs at least one nonzero weight")


@dataclass(frozen=True)
class RankedCluster:
    cluster: int
    letter: str
    score: float
    rationale: str


def default_priority_rule() -> PriorityRule:
    """The packaged rule file: favours stable, high-volume catchments with
    spare level headroom (high PC-1 and PC-2, low PC-4)."""
    with resources.files("sewerclust.data").joinpath("priority_rule.json").open() as fh:
        return load_priority_rule(fh)


def load_priority_rule(source) -> PriorityRule:
    if isinstance(source, (str, Path)):
        doc = json.loads(Path(source).read_text(encoding="utf-8"))
    else:
        doc = json.load(source)
    weights = {}
    for key, w in doc.get("weights", {}).items():
        name = key.strip().upper().replace("PC-", "PC")
        if not name.startswith("PC"):
            raise DataError(f"rule weight key {key!r} must name a component like PC1")
        try:
            idx = int(name[2:]) - 1
        except ValueError as exc:
            raise DataError(f"rule weight key {key!r} must name a component like PC1") from exc
        if idx < 0:
            raise DataError(f"rule weight key {key!r} must use 1-based components")
        weights[idx] = float(w)
    return PriorityRule(weights=weights, rationale=str(doc.get("rationale", "")))


def rank_clusters(scores: ClusterScores, rule: PriorityRule,
                  extremes: list[PcExtremes] | None = None) -> list[RankedCluster]:
    """Order clusters by the rule's weighted sum of mean component scores.

    Ties break towards the lower cluster index; a cluster whose means are
    all zero is called out as indistinguishable. The rationale names each
    weighted component's contribution and, when loading extremes are
    supplied, the attributes that dominate it.
    """
    for idx in rule.weights:
        if idx >= scores.n_pcs:
            raise DataError(
                f"rule references PC{idx + 1} but only {scores.n_pcs} are scored")

    by_extreme = {e.pc_index: e for e in extremes} if extremes else {}
    ranked = []
    for c, cid in enumerate(scores.cluster_ids):
        total = sum(w * scores.means[c, j] for j, w in rule.weights.items())
        parts = []
        for j in sorted(rule.weights, key=lambda j: -abs(rule.weights[j] * scores.means[c, j])):
            w = rule.weights[j]
            part = f"PC-{j + 1} (weight {w:+g}, mean {scores.means[c, j]:+.3f}"
            e = by_extreme.get(j)
            if e is not None:
                tags = []
                if e.positive:
                    tags.append(f"+{e.positive[0]}")
                if e.negative:
                    tags.append(f"-{e.negative[0]}")
                part += ", driven by " + "/".join(tags)
            parts.append(part + ")")
        rationale = "; ".join(parts)
        if np.all(scores.means[c] == 0):
            rationale = "indistinguishable: all mean scores are zero"
        ranked.append(RankedCluster(cluster=int(cid), letter=letters([cid])[0],
                                    score=float(total), rationale=rationale))
    ranked.sort(key=lambda rc: (-rc.score, rc.cluster))
    return ranked
