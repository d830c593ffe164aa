"""Parsing and validation of input files: water-level series, the
sub-catchment attribute table, and observed/simulated flow pairs.

All domain objects are immutable after construction and safe to share
between threads. Parsing is deterministic: identical bytes always produce
identical objects.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError

# Attribute schema, grouped the way the columns are produced:
# physical catchment properties, simulated sewage composition, and
# features derived from the water-level record.
PHYSICAL_COLUMNS = ("SA", "SG", "SP", "CA", "CG", "CP", "STA", "STG", "STP", "ELE")
COMPOSITION_COLUMNS = ("TVO", "ADD", "INF", "OVL", "IMP", "SAN")
WATER_LEVEL_COLUMNS = ("WAVE1", "WAVE2", "WAVE3", "MFD")
FEATURE_COLUMNS = PHYSICAL_COLUMNS + COMPOSITION_COLUMNS + WATER_LEVEL_COLUMNS

# Percentages bounded to [0, 100]. MFD is excluded: a surcharged pipe has a
# filling degree above 100%.
_STRICT_PERCENT_COLUMNS = ("SG", "CG", "STG", "ADD", "INF", "OVL", "IMP", "SAN")
_NONNEGATIVE_COLUMNS = ("SA", "SP", "CA", "CP", "STA", "STP", "TVO", "MFD",
                        "WAVE1", "WAVE2", "WAVE3")

DEFAULT_MAX_GAP = 6
DEFAULT_COMPOSITION_TOLERANCE = 1.0

_FLOAT_FMT = "%.17g"  # lossless float round-trip


def _snap(value: float, step: float) -> int | None:
    """Resolve a time offset to a whole number of steps, or None."""
    k = value / step
    rounded = round(k)
    if abs(k - rounded) > 1e-6:
        return None
    return int(rounded)


def _parse_timestamp(text: str, where: str) -> datetime:
    try:
        ts = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    except ValueError as exc:
        raise DataError(f"{where}: bad timestamp {text!r}") from exc
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


@dataclass(frozen=True)
class LevelSeries:
    """Uniformly sampled water level at one sub-catchment outlet.

    Sample i sits at start_time + i * step. Missing samples are masked,
    never interpolated here; levels above pipe_diameter are legal
    (surcharge).
    """

    catchment_id: str
    start_time: datetime
    step: float  # hours
    levels: np.ndarray
    pipe_diameter: float  # metres
    missing_mask: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=float)
        mask = self.missing_mask
        mask = np.zeros(levels.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "missing_mask", mask)
        if self.step <= 0:
            raise DataError("step must be positive")
        if levels.size == 0:
            raise DataError("level series is empty")
        if self.pipe_diameter <= 0:
            raise DataError("pipe diameter must be positive")
        if mask.shape != levels.shape:
            raise DataError("missing mask length does not match levels")
        valid = levels[~mask]
        if valid.size and (np.min(valid) < 0 or not np.all(np.isfinite(valid))):
            raise DataError("levels must be finite and non-negative")
        levels.flags.writeable = False
        mask.flags.writeable = False

    @property
    def n_samples(self) -> int:
        return int(self.levels.size)

    @property
    def times_hours(self) -> np.ndarray:
        """Sample positions in hours from the start of the series."""
        return np.arange(self.n_samples) * self.step


@dataclass(frozen=True)
class AttributeTable:
    """One row of catchment attributes per sub-catchment.

    The water-level feature columns (WAVE1..3, MFD) may be absent; NaN marks
    a value that a wavelet run still has to supply.
    """

    ids: tuple[str, ...]
    names: tuple[str, ...]
    values: Mapping[str, np.ndarray]
    composition_tolerance: float = DEFAULT_COMPOSITION_TOLERANCE

    def __post_init__(self):
        n = len(self.ids)
        if len(set(self.ids)) != n:
            raise DataError("duplicate id in attribute table")
        if len(self.names) != n:
            raise DataError("names length does not match ids")
        vals = {}
        for col in FEATURE_COLUMNS:
            if col not in self.values:
                raise DataError(f"missing column {col}")
            arr = np.asarray(self.values[col], dtype=float)
            if arr.shape != (n,):
                raise DataError(f"column {col} has wrong length")
            arr.flags.writeable = False
            vals[col] = arr
        object.__setattr__(self, "values", vals)
        self._check_ranges()
        self._check_composition()

    def _check_ranges(self):
        for col in _STRICT_PERCENT_COLUMNS:
            arr = self.values[col]
            bad = ~np.isnan(arr) & ((arr < 0) | (arr > 100))
            if bad.any():
                raise DataError(
                    f"percentage out of range in column {col} "
                    f"(id {self.ids[int(np.argmax(bad))]})")
        for col in _NONNEGATIVE_COLUMNS:
            arr = self.values[col]
            bad = ~np.isnan(arr) & (arr < 0)
            if bad.any():
                raise DataError(
                    f"negative value in column {col} "
                    f"(id {self.ids[int(np.argmax(bad))]})")
        for col in set(FEATURE_COLUMNS) - set(WATER_LEVEL_COLUMNS):
            if np.isnan(self.values[col]).any():
                raise DataError(f"missing value in required column {col}")

    def _check_composition(self):
        parts = np.vstack([self.values[c] for c in ("ADD", "INF", "OVL", "IMP", "SAN")])
        total = parts.sum(axis=0)
        off = np.abs(total - 100.0) > self.composition_tolerance
        if off.any():
            i = int(np.argmax(off))
            raise DataError(
                f"composition sum out of tolerance for id {self.ids[i]}: "
                f"{total[i]:.4g}% (tolerance {self.composition_tolerance}%)")

    @property
    def n_rows(self) -> int:
        return len(self.ids)

    @property
    def needs_wavelet_features(self) -> bool:
        """True when any WAVE1..3 or MFD entry still has to be computed."""
        return any(np.isnan(self.values[c]).any() for c in WATER_LEVEL_COLUMNS)

    def missing_water_level_features(self) -> list[tuple[str, str]]:
        """(id, column) pairs whose water-level feature is absent."""
        out = []
        for col in WATER_LEVEL_COLUMNS:
            for i in np.flatnonzero(np.isnan(self.values[col])):
                out.append((self.ids[int(i)], col))
        return sorted(out)


@dataclass(frozen=True)
class FlowPair:
    """Observed and simulated flow at one outlet, on a shared time grid."""

    catchment_id: str
    observed: np.ndarray
    simulated: np.ndarray

    def __post_init__(self):
        obs = np.asarray(self.observed, dtype=float)
        sim = np.asarray(self.simulated, dtype=float)
        object.__setattr__(self, "observed", obs)
        object.__setattr__(self, "simulated", sim)
        if obs.shape != sim.shape:
            raise DataError("observed and simulated lengths differ")
        if obs.size < 2:
            raise DataError("flow pair needs at least 2 samples")
        if not (np.all(np.isfinite(obs)) and np.all(np.isfinite(sim))):
            raise DataError("flows must be finite")
        if np.ptp(obs) == 0:
            raise DataError("constant observed series: NSE undefined")
        obs.flags.writeable = False
        sim.flags.writeable = False


def _read_rows(source, expected_header: Sequence[str], what: str):
    """Yield data rows of a comma-delimited source with a fixed header."""
    if isinstance(source, (str, Path)):
        fh = open(source, "r", newline="", encoding="utf-8")
        close = True
    else:
        fh = source
        close = False
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"empty {what} file") from None
        header = [h.strip().lower() for h in header]
        if header != [h.lower() for h in expected_header]:
            raise DataError(
                f"{what} header must be {','.join(expected_header)}, got {','.join(header)}")
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    finally:
        if close:
            fh.close()
    if not rows:
        raise DataError(f"{what} file has no data rows")
    return rows


def parse_level_series(source, diameter: float, catchment_id: str | None = None,
                       step: float = 1.0, max_gap: int = DEFAULT_MAX_GAP) -> LevelSeries:
    """Parse a `timestamp,level` file onto a uniform grid.

    Rows must be strictly time-ordered and every timestamp must fall on the
    declared step. Gaps of at most max_gap consecutive samples (absent rows
    or empty level cells) are masked as missing; anything longer is
    rejected.
    """
    if catchment_id is None:
        catchment_id = Path(source).stem if isinstance(source, (str, Path)) else "unknown"
    rows = _read_rows(source, ("timestamp", "level"), "level series")

    times: list[datetime] = []
    raw: list[float] = []
    for i, row in enumerate(rows):
        if len(row) != 2:
            raise DataError(f"level series row {i + 2}: expected 2 fields")
        times.append(_parse_timestamp(row[0], f"level series row {i + 2}"))
        cell = row[1].strip()
        if cell == "" or cell.lower() == "nan":
            raw.append(np.nan)
        else:
            try:
                raw.append(float(cell))
            except ValueError as exc:
                raise DataError(f"level series row {i + 2}: bad level {cell!r}") from exc

    start = times[0]
    n_slots = 1
    slot_of = [0]
    for i in range(1, len(times)):
        dt_hours = (times[i] - times[i - 1]).total_seconds() / 3600.0
        if dt_hours <= 0:
            raise DataError(
                f"non-monotone timestamps at row {i + 2} ({times[i].isoformat()})")
        k = _snap(dt_hours, step)
        if k is None:
            raise DataError(
                f"irregular step at row {i + 2}: {dt_hours:.6g} h is not a "
                f"multiple of the declared step {step:.6g} h")
        slot_of.append(slot_of[-1] + k)
        n_slots = slot_of[-1] + 1

    levels = np.full(n_slots, np.nan)
    for slot, value in zip(slot_of, raw):
        levels[slot] = value
    mask = np.isnan(levels)

    # Longest run of missing samples must stay within max_gap.
    run = 0
    for missing in mask:
        run = run + 1 if missing else 0
        if run > max_gap:
            raise DataError(
                f"gap of more than {max_gap} consecutive samples in "
                f"level series {catchment_id}")

    levels = np.where(mask, 0.0, levels)
    return LevelSeries(catchment_id=catchment_id, start_time=start, step=step,
                       levels=levels, pipe_diameter=diameter, missing_mask=mask)


def write_level_series(series: LevelSeries, path) -> None:
    """Write a series back to `timestamp,level` form (missing rows kept,
    with an empty level cell)."""
    buf = io.StringIO()
    buf.write("timestamp,level\n")
    for i in range(series.n_samples):
        ts = series.start_time + timedelta(hours=i * series.step)
        if series.missing_mask[i]:
            buf.write(f"{ts.isoformat()},\n")
        else:
            buf.write(f"{ts.isoformat()},{_FLOAT_FMT % series.levels[i]}\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def parse_attribute_table(source, composition_tolerance: float = DEFAULT_COMPOSITION_TOLERANCE,
                          ) -> AttributeTable:
    """Parse the per-catchment attribute table.

    The header must consist of `id,name` plus the attribute schema
    (case-insensitive); the four water-level feature columns may be left
    out and are then recorded as absent rather than zero.
    """
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError("empty attribute table") from None

    canonical = {c.lower(): c for c in ("id", "name") + FEATURE_COLUMNS}
    columns: list[str] = []
    for h in header:
        c = canonical.get(h.lower())
        if c is None:
            raise DataError(f"unknown column {h!r} in attribute table")
        if c in columns:
            raise DataError(f"repeated column {c} in attribute table")
        columns.append(c)
    for required in ("id", "name") + tuple(
            c for c in FEATURE_COLUMNS if c not in WATER_LEVEL_COLUMNS):
        if required not in columns:
            raise DataError(f"attribute table lacks required column {required}")

    ids: list[str] = []
    names: list[str] = []
    data: dict[str, list[float]] = {c: [] for c in columns if c not in ("id", "name")}
    for i, row in enumerate(reader):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) != len(columns):
            raise DataError(f"attribute table row {i + 2}: wrong field count")
        record = dict(zip(columns, (cell.strip() for cell in row)))
        ids.append(record["id"])
        names.append(record["name"])
        for col, cells in data.items():
            cell = record[col]
            if cell == "" or cell.lower() == "nan":
                cells.append(np.nan)
            else:
                try:
                    cells.append(float(cell))
                except ValueError as exc:
                    raise DataError(
                        f"attribute table row {i + 2}: bad value {cell!r} in {col}") from exc
    if not ids:
        raise DataError("attribute table has no data rows")

    values = {c: np.asarray(v, dtype=float) for c, v in data.items()}
    for col in WATER_LEVEL_COLUMNS:
        if col not in values:
            values[col] = np.full(len(ids), np.nan)
    return AttributeTable(ids=tuple(ids), names=tuple(names), values=values,
                          composition_tolerance=composition_tolerance)


def write_attribute_table(table: AttributeTable, path) -> None:
    buf = io.StringIO()
    buf.write("id,name," + ",".join(FEATURE_COLUMNS) + "\n")
    for i, (cid, name) in enumerate(zip(table.ids, table.names)):
        cells = [cid, name]
        for col in FEATURE_COLUMNS:
            v = table.values[col][i]
            cells.append("" if np.isnan(v) else _FLOAT_FMT % v)
        buf.write(",".join(cells) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def parse_flow_pair(source, catchment_id: str | None = None) -> FlowPair:
    """Parse a `timestamp,observed,simulated` file. Both series must share
    the grid exactly; no resampling is attempted."""
    if catchment_id is None:
        catchment_id = Path(source).stem if isinstance(source, (str, Path)) else "unknown"
    rows = _read_rows(source, ("timestamp", "observed", "simulated"), "flow")
    obs, sim = [], []
    last = None
    for i, row in enumerate(rows):
        if len(row) != 3:
            raise DataError(f"flow row {i + 2}: expected 3 fields")
        ts = _parse_timestamp(row[0], f"flow row {i + 2}")
        if last is not None and ts <= last:
            raise DataError(f"non-monotone timestamps in flow file at row {i + 2}")
        last = ts
        try:
            obs.append(float(row[1]))
            sim.append(float(row[2]))
        except ValueError as exc:
            raise DataError(f"flow row {i + 2}: bad value") from exc
    return FlowPair(catchment_id=catchment_id, observed=np.asarray(obs),
                    simulated=np.asarray(sim))


def mean_filling_degree(series: LevelSeries) -> float:
    """Time-averaged level over pipe diameter, as a percentage.

    Missing samples are excluded. Values above 100 indicate surcharge.
    """
    valid = series.levels[~series.missing_mask]
    if valid.size == 0:
        raise DataError(f"all samples missing in series {series.catchment_id}")
    return 100.0 * float(np.mean(valid / series.pipe_diameter))


@dataclass(frozen=True)
class CatchmentEntry:
    id: str
    name: str
    levels_path: Path | None
    diameter_m: float | None
    flows_path: Path | None


@dataclass(frozen=True)
class DatasetManifest:
    """Resolved dataset.json: catchment ids mapped to names, data files and
    pipe diameters, plus the attribute table path."""

    root: Path
    attributes_path: Path
    catchments: tuple[CatchmentEntry, ...]

    def entry(self, catchment_id: str) -> CatchmentEntry:
        for e in self.catchments:
            if e.id == catchment_id:
                return e
        raise ConfigError(f"catchment {catchment_id} not in manifest")


def load_manifest(path) -> DatasetManifest:
    """Load and validate dataset.json; all referenced files must exist."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"manifest is not valid JSON: {exc}") from exc
    root = path.parent
    if "attributes" not in doc:
        raise ConfigError("manifest lacks 'attributes'")
    attributes = root / doc["attributes"]
    if not attributes.is_file():
        raise ConfigError(f"attribute table not found: {attributes}")

    entries = []
    seen = set()
    for item in doc.get("catchments", []):
        cid = str(item.get("id", "")).strip()
        if not cid:
            raise ConfigError("manifest catchment without id")
        if cid in seen:
            raise ConfigError(f"duplicate catchment id {cid} in manifest")
        seen.add(cid)
        levels = item.get("levels")
        flows = item.get("flows")
        diameter = item.get("diameter_m")
        levels_path = root / levels if levels else None
        flows_path = root / flows if flows else None
        if levels_path and not levels_path.is_file():
            raise ConfigError(f"level file not found: {levels_path}")
        if flows_path and not flows_path.is_file():
            raise ConfigError(f"flow file not found: {flows_path}")
        if levels_path and (diameter is None or float(diameter) <= 0):
            raise ConfigError(f"catchment {cid}: positive diameter_m required with levels")
        entries.append(CatchmentEntry(
            id=cid, name=str(item.get("name", cid)),
            levels_path=levels_path,
            diameter_m=float(diameter) if diameter is not None else None,
            flows_path=flows_path))
    if not entries:
        raise ConfigError("manifest lists no catchments")
    return DatasetManifest(root=root, attributes_path=attributes,
                           catchments=tuple(entries))
