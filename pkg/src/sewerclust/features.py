"""Assembly of the per-catchment feature matrix and column scaling."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import DataError
from .ingest import FEATURE_COLUMNS, WATER_LEVEL_COLUMNS, AttributeTable

SCALING_METHODS = ("zscore", "minmax")

_FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class ScaleParams:
    """Per-column affine transform: scaled = (raw - center) / spread.

    Constant columns (spread 0) are mapped to zeros and flagged; their
    inverse restores the center value.
    """

    method: str
    center: np.ndarray
    spread: np.ndarray
    constant: np.ndarray

    def __post_init__(self):
        for name in ("center", "spread", "constant"):
            arr = np.asarray(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class FeatureMatrix:
    """Numeric matrix of catchment features, rows ordered as the source
    attribute table, columns in schema order."""

    row_ids: tuple[str, ...]
    column_names: tuple[str, ...]
    values: np.ndarray
    scaling: str = "raw"
    scale_params: ScaleParams | None = None
    computed_features: tuple[tuple[str, str], ...] = field(default=())

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != (len(self.row_ids), len(self.column_names)):
            raise DataError("feature matrix shape does not match ids x columns")
        if len(set(self.row_ids)) != len(self.row_ids):
            raise DataError("duplicate row id in feature matrix")
        if not np.all(np.isfinite(values)):
            raise DataError("feature matrix contains non-finite entries")
        if self.scaling not in ("raw",) + SCALING_METHODS:
            raise DataError(f"unknown scaling {self.scaling!r}")
        values.flags.writeable = False

    @property
    def n_rows(self) -> int:
        return len(self.row_ids)

    @property
    def n_cols(self) -> int:
        return len(self.column_names)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_names.index(name)]


def assemble(table: AttributeTable,
             computed: Mapping[str, Mapping[str, float]] | None = None) -> FeatureMatrix:
    """Build the raw feature matrix from the attribute table plus computed
    water-level features.

    `computed` maps catchment id to a {WAVE1, WAVE2, WAVE3, MFD} mapping.
    Values stored in the table win over computed ones; every id must end up
    fully populated. Row order follows the table, column order the schema,
    so the iteration order of `computed` never matters.
    """
    computed = computed or {}
    n = table.n_rows
    values = np.empty((n, len(FEATURE_COLUMNS)))
    provenance: list[tuple[str, str]] = []
    for j, col in enumerate(FEATURE_COLUMNS):
        stored = table.values[col]
        for i, cid in enumerate(table.ids):
            v = stored[i]
            if np.isnan(v) and col in WATER_LEVEL_COLUMNS:
                v = computed.get(cid, {}).get(col, np.nan)
                if not np.isnan(v):
                    provenance.append((cid, col))
            if np.isnan(v):
                raise DataError(
                    f"catchment {cid}: feature {col} neither stored nor computed")
            values[i, j] = v
    return FeatureMatrix(row_ids=table.ids, column_names=FEATURE_COLUMNS,
                         values=values, scaling="raw",
                         computed_features=tuple(sorted(provenance)))


def scale(matrix: FeatureMatrix, method: str = "zscore") -> FeatureMatrix:
    """Scale a raw matrix column-wise.

    zscore uses the sample standard deviation (n-1 denominator); minmax maps
    each column onto [0, 1]. Constant columns become all zeros and are
    flagged rather than rejected. Scaling an already scaled matrix is an
    error: the transform parameters would compose confusingly.
    """
    if matrix.scaling != "raw":
        raise DataError(f"matrix is already scaled ({matrix.scaling})")
    if method not in SCALING_METHODS:
        raise DataError(f"unknown scaling method {method!r}")
    x = matrix.values
    if method == "zscore":
        center = x.mean(axis=0)
        spread = x.std(axis=0, ddof=1) if x.shape[0] > 1 else np.zeros(x.shape[1])
    else:
        center = x.min(axis=0)
        spread = x.max(axis=0) - center
    constant = spread == 0
    safe = np.where(constant, 1.0, spread)
    scaled = (x - center) / safe
    scaled[:, constant] = 0.0
    params = ScaleParams(method=method, center=center, spread=spread, constant=constant)
    return FeatureMatrix(row_ids=matrix.row_ids, column_names=matrix.column_names,
                         values=scaled, scaling=method, scale_params=params,
                         computed_features=matrix.computed_features)


def inverse_scale(matrix: FeatureMatrix) -> FeatureMatrix:
    """Undo scale(); constant columns are restored to their center value."""
    if matrix.scaling == "raw" or matrix.scale_params is None:
        raise DataError("matrix is not scaled")
    p = matrix.scale_params
    raw = matrix.values * np.where(p.constant, 0.0, p.spread) + p.center
    return FeatureMatrix(row_ids=matrix.row_ids, column_names=matrix.column_names,
                         values=raw, scaling="raw",
                         computed_features=matrix.computed_features)


def write_feature_matrix(matrix: FeatureMatrix, csv_path, meta_path=None) -> None:
    """Emit features.csv plus a metadata sidecar carrying the scaling."""
    buf = io.StringIO()
    buf.write("id," + ",".join(matrix.column_names) + "\n")
    for i, cid in enumerate(matrix.row_ids):
        cells = [cid] + [_FLOAT_FMT % v for v in matrix.values[i]]
        buf.write(",".join(cells) + "\n")
    Path(csv_path).write_text(buf.getvalue(), encoding="utf-8")

    if meta_path is None:
        return
    meta = {
        "scaling": matrix.scaling,
        "columns": list(matrix.column_names),
        "computed_features": [list(p) for p in matrix.computed_features],
    }
    if matrix.scale_params is not None:
        p = matrix.scale_params
        meta["scale_params"] = {
            "method": p.method,
            "center": [float(v) for v in p.center],
            "spread": [float(v) for v in p.spread],
            "constant": [bool(v) for v in p.constant],
        }
    Path(meta_path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                               encoding="utf-8")


def read_feature_matrix(csv_path, meta_path=None) -> FeatureMatrix:
    """Read a feature matrix written by write_feature_matrix."""
    text = Path(csv_path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if not header or header[0] != "id":
        raise DataError("features file must start with an id column")
    columns = tuple(header[1:])
    ids, rows = [], []
    for row in reader:
        if not row:
            continue
        ids.append(row[0])
        rows.append([float(v) for v in row[1:]])

    scaling = "raw"
    params = None
    computed: tuple[tuple[str, str], ...] = ()
    if meta_path is not None and Path(meta_path).is_file():
        meta = json.loads(Path(meta_path).read_text(encoding="utf-8"))
        scaling = meta.get("scaling", "raw")
        computed = tuple((str(a), str(b)) for a, b in meta.get("computed_features", []))
        if "scale_params" in meta:
            sp = meta["scale_params"]
            params = ScaleParams(method=sp["method"],
                                 center=np.asarray(sp["center"], dtype=float),
                                 spread=np.asarray(sp["spread"], dtype=float),
                                 constant=np.asarray(sp["constant"], dtype=bool))
    return FeatureMatrix(row_ids=tuple(ids), column_names=columns,
                         values=np.asarray(rows, dtype=float), scaling=scaling,
                         scale_params=params, computed_features=computed)
