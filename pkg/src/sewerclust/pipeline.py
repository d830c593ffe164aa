"""End-to-end batch pipeline and the per-stage entry points behind the CLI
subcommands.

Every stage reads its inputs from files (the first stage from the dataset
manifest, later ones from artifacts emitted before them) and writes its
outputs atomically, so a full run and a chain of stage invocations produce
identical artifacts. All numeric output is deterministic for a fixed
configuration and seed.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import calibration as calib
from . import features as feat
from . import ingest, pca, wavelet
from .cluster import (adjusted_rand_index, align_labels, cut_dendrogram,
                      dendrogram_from_dict, dendrogram_to_dict, grid_from_dict,
                      grid_to_dict, hca_ward, kmeans_assignment, letters,
                      select_k, silhouette, som_clusters, som_grid_size, som_train,
                      to_newick)
from .cluster.assignment import ClusterAssignment
from .errors import ConfigError, DataError, DependencyError
from .pca import (ClusterScores, PcExtremes, default_priority_rule,
                  load_priority_rule, rank_clusters)

_FMT = "%.17g"
METHODS = ("kmeans", "hca", "som")


@dataclass
class RunConfig:
    """Parameters of one analysis run. seed is mandatory; there is no
    wall-clock fallback, so identical configs always reproduce."""

    manifest: Path
    out_dir: Path
    seed: int
    step: float = 1.0
    max_gap: int = ingest.DEFAULT_MAX_GAP
    composition_tolerance: float = ingest.DEFAULT_COMPOSITION_TOLERANCE
    scale_min: float | None = None  # defaults to 2 * step
    scale_max: float = wavelet.DEFAULT_MAX_SCALE
    scale_count: int = wavelet.DEFAULT_SCALE_COUNT
    fb: float = 1.5
    fc: float = 1.0
    wave_report: str = "scale"
    scaling: str = "zscore"
    k: int | None = None
    k_min: int = 2
    k_max: int = 8
    restarts: int = 20
    som_epochs: int = 200
    adopt: str = "som"
    rule_file: Path | None = None
    r2_method: str = "pearson"
    n_pcs: int = 4
    plots: bool = True

    def __post_init__(self):
        self.manifest = Path(self.manifest)
        self.out_dir = Path(self.out_dir)
        if self.rule_file is not None:
            self.rule_file = Path(self.rule_file)
        if self.seed is None:
            raise ConfigError("seed is mandatory")
        self.seed = int(self.seed)
        if self.adopt not in METHODS:
            raise ConfigError(f"adopt must be one of {METHODS}")
        if self.scaling not in feat.SCALING_METHODS:
            raise ConfigError(f"scaling must be one of {feat.SCALING_METHODS}")
        if self.wave_report not in ("scale", "variance"):
            raise ConfigError("wave_report must be 'scale' or 'variance'")
        if self.k is not None and self.k < 2:
            raise ConfigError("k must be at least 2")
        if self.k_min < 2 or self.k_max < self.k_min:
            raise ConfigError("need 2 <= k_min <= k_max")

    def morlet(self) -> wavelet.MorletParams:
        return wavelet.MorletParams(fb=self.fb, fc=self.fc)

    def scale_grid(self) -> np.ndarray:
        min_scale = self.scale_min if self.scale_min is not None else 2.0 * self.step
        return wavelet.log_scale_grid(min_scale, self.scale_max, self.scale_count)

    def echo(self) -> dict:
        """Config as stored in reports: everything except the output
        location, so reruns into different directories compare equal."""
        doc = {}
        for f in fields(self):
            if f.name == "out_dir":
                continue
            v = getattr(self, f.name)
            doc[f.name] = str(v) if isinstance(v, Path) else v
        return doc


def config_from_dict(doc: dict) -> RunConfig:
    allowed = {f.name for f in fields(RunConfig)}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = [k for k in ("manifest", "out_dir", "seed") if k not in doc]
    if missing:
        raise ConfigError(f"config lacks required keys: {missing}")
    return RunConfig(**doc)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_json(path: Path, doc) -> None:
    _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _read_json(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


def _require(path: Path, producer: str) -> Path:
    if not path.is_file():
        raise DependencyError(f"missing upstream artifact {path.name}; run '{producer}' first")
    return path


# ---------------------------------------------------------------- features

def compute_water_level_features(config: RunConfig, emit: bool = True):
    """Wavelet features and mean filling degree for every catchment with a
    level series; optionally emits wavevar_<id>.csv as it goes."""
    manifest = ingest.load_manifest(config.manifest)
    params = config.morlet()
    grid = config.scale_grid()
    computed: dict[str, dict[str, float]] = {}
    for entry in manifest.catchments:
        if entry.levels_path is None:
            continue
        series = ingest.parse_level_series(entry.levels_path, entry.diameter_m,
                                           catchment_id=entry.id, step=config.step,
                                           max_gap=config.max_gap)
        spectrum = wavelet.cwt(series, grid, params)
        curve = wavelet.wavelet_variance(spectrum)
        tops = wavelet.top_periods(curve, 3, report=config.wave_report)
        computed[entry.id] = {
            "WAVE1": tops.periods[0],
            "WAVE2": tops.periods[1],
            "WAVE3": tops.periods[2],
            "MFD": ingest.mean_filling_degree(series),
        }
        if emit:
            buf = io.StringIO()
            buf.write("scale_hours,variance\n")
            for a, v in zip(curve.scales, curve.variance):
                buf.write(f"{_FMT % a},{_FMT % v}\n")
            _atomic_write(config.out_dir / f"wavevar_{entry.id}.csv", buf.getvalue())
    return manifest, computed


def run_features(config: RunConfig) -> feat.FeatureMatrix:
    """Stage 1: ingest, wavelet features, assembly and scaling."""
    manifest, computed = compute_water_level_features(config)
    table = ingest.parse_attribute_table(manifest.attributes_path,
                                         composition_tolerance=config.composition_tolerance)
    raw = feat.assemble(table, computed)
    scaled = feat.scale(raw, config.scaling)
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    feat.write_feature_matrix(scaled, out / "features.csv", out / "features.meta.json")
    return scaled


def _load_features(config: RunConfig) -> feat.FeatureMatrix:
    csv_path = _require(config.out_dir / "features.csv", "features")
    meta_path = _require(config.out_dir / "features.meta.json", "features")
    return feat.read_feature_matrix(csv_path, meta_path)


def _zscored(matrix: feat.FeatureMatrix) -> feat.FeatureMatrix:
    if matrix.scaling == "zscore":
        return matrix
    return feat.scale(feat.inverse_scale(matrix), "zscore")


# ---------------------------------------------------------------- cluster

def _with_quality(assignment: ClusterAssignment, matrix) -> ClusterAssignment:
    if assignment.k < 2:
        return assignment
    _, sc = silhouette(matrix, assignment.labels)
    return ClusterAssignment(method=assignment.method, labels=assignment.labels,
                             k=assignment.k, row_ids=assignment.row_ids,
                             quality=sc, seed=assignment.seed)


def run_cluster(config: RunConfig, methods=METHODS) -> dict:
    """Stage 2: silhouette-guided k, then the requested clustering methods,
    aligned onto the k-means labels where several run together."""
    matrix = _load_features(config)
    n = matrix.n_rows
    out = config.out_dir

    k_max = min(config.k_max, n - 1)
    if config.k is None and k_max < config.k_min:
        raise DataError(f"too few rows ({n}) to select k in [{config.k_min}, {config.k_max}]")
    selection = select_k(matrix, range(config.k_min, k_max + 1), seed=config.seed,
                         restarts=config.restarts)
    buf = io.StringIO()
    buf.write("k,sc\n")
    for k_val, sc in selection.scores:
        buf.write(f"{k_val},{_FMT % sc}\n")
    _atomic_write(out / "sc_vs_k.csv", buf.getvalue())
    k = config.k if config.k is not None else selection.best_k

    assignments: dict[str, ClusterAssignment] = {}
    meta: dict = {"k": k, "selected_k": selection.best_k, "seed": config.seed,
                  "scaling": matrix.scaling, "quality": {}}

    kma, _ = kmeans_assignment(matrix, k, seed=config.seed, restarts=config.restarts)
    assignments["kmeans"] = kma

    if "hca" in methods:
        dendrogram = hca_ward(matrix)
        cut = cut_dendrogram(dendrogram, k=k)
        hca_asg = _with_quality(cut.assignment, matrix)
        aligned = align_labels(kma, hca_asg)
        assignments["hca"] = aligned.relabeled
        _atomic_write(out / "dendrogram.txt", to_newick(dendrogram) + "\n")
        _write_json(out / "dendrogram.json", dendrogram_to_dict(dendrogram))
        meta["hca"] = {"cut_height": cut.cut_height, "d_max": dendrogram.d_max,
                       "in_rule_of_thumb_band": cut.in_rule_of_thumb_band}

    if "som" in methods:
        rows, cols = som_grid_size(n)
        grid = som_train(matrix, rows, cols, seed=config.seed, epochs=config.som_epochs)
        som_asg = som_clusters(grid, matrix, k, seed=config.seed, restarts=config.restarts)
        if som_asg.k == k:
            som_asg = align_labels(kma, som_asg).relabeled
        assignments["som"] = som_asg
        _write_json(out / "som_grid.json", grid_to_dict(grid))
        meta["som"] = {"rows": rows, "cols": cols,
                       "quantization_error": grid.quantization_error,
                       "qe_monotone_over_phases": grid.qe_monotone_over_phases,
                       "degenerate": grid.degenerate, "k": som_asg.k}

    for name, asg in assignments.items():
        meta["quality"][name] = asg.quality

    wanted = [m for m in METHODS if m in methods]
    buf = io.StringIO()
    buf.write("id," + ",".join(wanted) + "\n")
    for i, cid in enumerate(matrix.row_ids):
        row = [cid] + [letters(assignments[m].labels)[i] for m in wanted]
        buf.write(",".join(row) + "\n")
    _atomic_write(out / "clusters.csv", buf.getvalue())
    _write_json(out / "cluster_meta.json", meta)
    return {"assignments": assignments, "meta": meta, "selection": selection}


def read_clusters(out_dir: Path) -> tuple[tuple[str, ...], dict[str, np.ndarray]]:
    """clusters.csv back as ids plus per-method integer labels."""
    path = _require(Path(out_dir) / "clusters.csv", "cluster")
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    header = lines[0].split(",")
    ids, columns = [], {m: [] for m in header[1:]}
    for line in lines[1:]:
        cells = line.split(",")
        ids.append(cells[0])
        for m, cell in zip(header[1:], cells[1:]):
            columns[m].append(ord(cell) - ord("A"))
    return tuple(ids), {m: np.asarray(v, dtype=int) for m, v in columns.items()}


# ---------------------------------------------------------------- pca/rank

def run_pca_stage(config: RunConfig) -> pca.PcaResult:
    """Stage 3: correlation PCA of the feature matrix."""
    matrix = _zscored(_load_features(config))
    result = pca.pca(matrix)
    n_pcs = min(config.n_pcs, result.n_components)
    out = config.out_dir

    buf = io.StringIO()
    buf.write("attribute," + ",".join(result.pc_name(j) for j in range(n_pcs)) + "\n")
    for i, name in enumerate(result.column_names):
        cells = [name] + [_FMT % result.loadings[i, j] for j in range(n_pcs)]
        buf.write(",".join(cells) + "\n")
    _atomic_write(out / "pca_loadings.csv", buf.getvalue())

    buf = io.StringIO()
    buf.write("id," + ",".join(result.pc_name(j) for j in range(n_pcs)) + "\n")
    for i, cid in enumerate(result.row_ids):
        cells = [cid] + [_FMT % result.scores[i, j] for j in range(n_pcs)]
        buf.write(",".join(cells) + "\n")
    _atomic_write(out / "pca_scores.csv", buf.getvalue())

    extremes = pca.loading_extremes(result, n_pcs)
    _write_json(out / "pca_meta.json", {
        "explained": [float(v) for v in result.explained],
        "n_components": result.n_components,
        "n_pcs": n_pcs,
        "degenerate_pairs": list(result.degenerate_pairs),
        "extremes": [
            {"pc": f"PC-{e.pc_index + 1}",
             "positive": list(e.positive) if e.positive else None,
             "negative": list(e.negative) if e.negative else None}
            for e in extremes],
    })
    return result


def _read_scores(out_dir: Path):
    path = _require(Path(out_dir) / "pca_scores.csv", "pca")
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    ids = []
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        ids.append(cells[0])
        rows.append([float(v) for v in cells[1:]])
    return tuple(ids), np.asarray(rows)


def run_rank(config: RunConfig) -> list:
    """Stage 4: per-cluster mean scores of the adopted method, ranked by
    the priority rule."""
    out = config.out_dir
    score_ids, scores = _read_scores(out)
    cluster_ids, columns = read_clusters(out)
    if score_ids != cluster_ids:
        raise DependencyError("stale artifacts: pca_scores.csv and clusters.csv "
                              "cover different catchments")
    if config.adopt not in columns:
        raise DependencyError(f"clusters.csv has no {config.adopt} column")
    labels = columns[config.adopt]
    k = int(labels.max()) + 1

    means = np.empty((k, scores.shape[1]))
    for c in range(k):
        means[c] = scores[labels == c].mean(axis=0)
    cscores = ClusterScores(cluster_ids=tuple(range(k)), means=means,
                            n_pcs=scores.shape[1])

    meta = _read_json(_require(out / "pca_meta.json", "pca"))
    extremes = []
    for e in meta.get("extremes", []):
        idx = int(e["pc"].split("-")[1]) - 1
        extremes.append(PcExtremes(
            pc_index=idx,
            positive=tuple(e["positive"]) if e.get("positive") else None,
            negative=tuple(e["negative"]) if e.get("negative") else None))

    rule = (load_priority_rule(config.rule_file) if config.rule_file
            else default_priority_rule())
    ranked = rank_clusters(cscores, rule, extremes)

    buf = io.StringIO()
    buf.write("cluster," + ",".join(f"PC-{j + 1}" for j in range(scores.shape[1])) + "\n")
    for c in range(k):
        buf.write(",".join([chr(ord("A") + c)] + [_FMT % v for v in means[c]]) + "\n")
    _atomic_write(out / "pca_cluster_scores.csv", buf.getvalue())

    _write_json(out / "ranking.json", {
        "adopted_method": config.adopt,
        "rule": {"weights": {f"PC{j + 1}": w for j, w in sorted(rule.weights.items())},
                 "rationale": rule.rationale},
        "ranking": [{"cluster": rc.letter, "score": rc.score, "rationale": rc.rationale}
                    for rc in ranked],
    })
    return ranked


# ---------------------------------------------------------------- calibrate

def run_calibrate(config: RunConfig) -> list[calib.CalibrationScore]:
    """Stage 5: NSE and R^2 for every catchment with observed/simulated
    flows."""
    manifest = ingest.load_manifest(config.manifest)
    results = []
    for entry in manifest.catchments:
        if entry.flows_path is None:
            continue
        pair = ingest.parse_flow_pair(entry.flows_path, catchment_id=entry.id)
        results.append(calib.evaluate(pair, r2_method=config.r2_method))
    buf = io.StringIO()
    buf.write("id,nse,r2,accepted\n")
    for score in results:
        buf.write(f"{score.catchment_id},{_FMT % score.nse},{_FMT % score.r2},"
                  f"{str(score.accepted).lower()}\n")
    _atomic_write(config.out_dir / "calibration.csv", buf.getvalue())
    return results


# ---------------------------------------------------------------- plots

def available_plots() -> dict[str, str]:
    return {
        "sc_vs_k": "mean silhouette against cluster count (needs sc_vs_k.csv)",
        "dendrogram": "hierarchical merge tree (needs dendrogram.json)",
        "som_hits": "samples per map neuron (needs som_grid.json)",
        "som_umatrix": "neighbour weight distances (needs som_grid.json)",
        "pca_biplot_1_2": "scores and loadings, PC-1 vs PC-2 (needs features + pca)",
        "pca_biplot_3_4": "scores and loadings, PC-3 vs PC-4 (needs features + pca)",
        "score_bars": "per-catchment component scores (needs features + pca)",
        "wavelet": "coefficient heatmap per catchment (needs the dataset manifest)",
    }


def run_plots(config: RunConfig, with_wavelet: bool = False) -> list[str]:
    """Render every plot whose inputs exist; returns the files written."""
    from . import plots

    out = config.out_dir
    written: list[str] = []

    sc_path = out / "sc_vs_k.csv"
    if sc_path.is_file():
        rows = [line.split(",") for line in
                sc_path.read_text(encoding="utf-8").strip().splitlines()[1:]]
        plots.plot_sc_vs_k([(int(k), float(sc)) for k, sc in rows], out / "sc_vs_k.svg")
        written.append("sc_vs_k.svg")

    dj = out / "dendrogram.json"
    if dj.is_file():
        plots.plot_dendrogram(dendrogram_from_dict(_read_json(dj)), out / "dendrogram.svg")
        written.append("dendrogram.svg")

    gj = out / "som_grid.json"
    if gj.is_file():
        grid = grid_from_dict(_read_json(gj))
        plots.plot_som_hits(grid, out / "som_hits.svg")
        plots.plot_som_umatrix(grid, out / "som_umatrix.svg")
        written.extend(["som_hits.svg", "som_umatrix.svg"])

    if (out / "features.csv").is_file() and (out / "pca_meta.json").is_file():
        result = run_pca_stage(config)  # recompute: cheap and exact
        labels = None
        if (out / "clusters.csv").is_file():
            _, columns = read_clusters(out)
            labels = columns.get(config.adopt)
        plots.plot_pca_biplot(result, 0, 1, out / "pca_biplot_1_2.svg", labels=labels)
        written.append("pca_biplot_1_2.svg")
        if result.n_components >= 4:
            plots.plot_pca_biplot(result, 2, 3, out / "pca_biplot_3_4.svg", labels=labels)
            written.append("pca_biplot_3_4.svg")
        plots.plot_score_bars(result, out / "score_bars.svg",
                              n_pcs=min(config.n_pcs, result.n_components), labels=labels)
        written.append("score_bars.svg")

    if with_wavelet:
        from . import plots as _plots

        manifest = ingest.load_manifest(config.manifest)
        params = config.morlet()
        grid_scales = config.scale_grid()
        for entry in manifest.catchments:
            if entry.levels_path is None:
                continue
            series = ingest.parse_level_series(entry.levels_path, entry.diameter_m,
                                               catchment_id=entry.id, step=config.step,
                                               max_gap=config.max_gap)
            spectrum = wavelet.cwt(series, grid_scales, params)
            _plots.plot_wavelet_spectrum(spectrum, out / f"wavelet_{entry.id}.svg",
                                         title=f"catchment {entry.id}")
            written.append(f"wavelet_{entry.id}.svg")
    return written


# ---------------------------------------------------------------- pipeline

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_pipeline(config: RunConfig) -> dict:
    """Run every stage and assemble report.json.

    The report carries content checksums of all numeric artifacts, the
    cross-method agreement, and the priority ranking; rerunning the same
    config and inputs reproduces every numeric artifact byte for byte.
    """
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)

    run_features(config)
    bundle = run_cluster(config)
    run_pca_stage(config)
    ranked = run_rank(config)
    scores = run_calibrate(config)
    if config.plots:
        run_plots(config)

    ids, columns = read_clusters(out)
    agreement = {}
    names = [m for m in METHODS if m in columns]
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            a, b = names[i], names[j]
            same = float(np.mean(columns[a] == columns[b]))
            agreement[f"{a}_vs_{b}"] = {
                "fraction": same,
                "ari": adjusted_rand_index(columns[a], columns[b]),
            }

    meta = bundle["meta"]
    flags = {}
    if meta.get("som", {}).get("degenerate"):
        flags["som_degenerate"] = True
    negative = [s.catchment_id for s in scores if s.negative_slope]
    if negative:
        flags["negative_slope_flows"] = negative

    artifacts = {}
    for path in sorted(out.glob("*.csv")) + sorted(out.glob("*.json")):
        if path.name == "report.json":
            continue
        artifacts[path.name] = _sha256(path)

    report = {
        "config": config.echo(),
        "n_catchments": len(ids),
        "k": meta["k"],
        "selected_k": meta["selected_k"],
        "sc_table": [[k_val, sc] for k_val, sc in bundle["selection"].scores],
        "quality": meta["quality"],
        "agreement": agreement,
        "adopted_method": config.adopt,
        "ranking": [rc.letter for rc in ranked],
        "calibration": {
            "scored": len(scores),
            "accepted": sum(1 for s in scores if s.accepted),
        },
        "flags": flags,
        "artifacts": artifacts,
    }
    _write_json(out / "report.json", report)
    return report
