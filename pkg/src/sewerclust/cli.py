"""Command line interface.

Exit codes: 0 success, 1 computation or data error, 2 configuration or
I/O error. Failures are reported as a JSON error record on stderr (and in
error.json inside the output directory when one is known).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, DataError, SewerclustError
from .pipeline import (METHODS, RunConfig, available_plots, config_from_dict,
                       run_calibrate, run_cluster, run_features, run_pca_stage,
                       run_pipeline, run_plots, run_rank)

_CONFIG_FLAGS = (
    ("--step", float, "sampling step of the level series in hours"),
    ("--max-gap", int, "longest tolerated gap in samples"),
    ("--scale-min", float, "smallest wavelet scale in hours"),
    ("--scale-max", float, "largest wavelet scale in hours"),
    ("--scale-count", int, "number of wavelet scales"),
    ("--fb", float, "Morlet bandwidth parameter"),
    ("--fc", float, "Morlet centre frequency"),
    ("--wave-report", str, "report dominant periods as 'scale' or 'variance'"),
    ("--scaling", str, "feature scaling: zscore or minmax"),
    ("--k", int, "fixed number of clusters (default: silhouette-selected)"),
    ("--k-min", int, "smallest k to try"),
    ("--k-max", int, "largest k to try"),
    ("--restarts", int, "k-means restarts"),
    ("--som-epochs", int, "SOM training epochs"),
    ("--adopt", str, "method whose clusters feed the ranking (kmeans/hca/som)"),
    ("--rule-file", str, "priority rule JSON (default: packaged rule)"),
    ("--r2-method", str, "R^2 definition: pearson or identity"),
    ("--n-pcs", int, "components reported in tables and plots"),
)


def _add_config_flags(parser: argparse.ArgumentParser, with_seed: bool) -> None:
    parser.add_argument("--manifest", help="dataset.json describing the input files")
    parser.add_argument("--out", help="artifact directory")
    parser.add_argument("--config", help="run configuration JSON; flags override it")
    if with_seed:
        parser.add_argument("--seed", type=int, help="RNG seed (required, no default)")
    for flag, typ, help_text in _CONFIG_FLAGS:
        parser.add_argument(flag, type=typ, help=help_text)
    parser.add_argument("--no-plots", action="store_true", help="skip SVG rendering")


def _build_config(args, need_manifest: bool = True) -> RunConfig:
    doc: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc

    for flag, _, _ in _CONFIG_FLAGS:
        name = flag.lstrip("-").replace("-", "_")
        value = getattr(args, name, None)
        if value is not None:
            doc[name] = value
    if args.manifest:
        doc["manifest"] = args.manifest
    if args.out:
        doc["out_dir"] = args.out
    if getattr(args, "seed", None) is not None:
        doc["seed"] = args.seed
    if getattr(args, "no_plots", False):
        doc["plots"] = False

    if "manifest" not in doc:
        if need_manifest:
            raise ConfigError("a dataset manifest is required (--manifest)")
        doc["manifest"] = "unused-manifest.json"
    if "out_dir" not in doc:
        raise ConfigError("an output directory is required (--out)")
    if "seed" not in doc:
        if _needs_seed(args):
            raise ConfigError("--seed is mandatory (there is no wall-clock default)")
        doc["seed"] = 0
    return config_from_dict(doc)


def _needs_seed(args) -> bool:
    return args.command in ("run", "cluster")


def _error_record(exc: Exception, out_dir: Path | None) -> None:
    record = {"error": type(exc).__name__, "message": str(exc)}
    sys.stderr.write(json.dumps(record) + "\n")
    if out_dir is not None and out_dir.is_dir():
        try:
            (out_dir / "error.json").write_text(json.dumps(record, indent=2) + "\n",
                                                encoding="utf-8")
        except OSError:
            pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sewerclust",
        description="Cluster sewer sub-catchments from water-level dynamics and "
                    "catchment attributes, interpret the groups with PCA, and rank "
                    "them for priority control.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full pipeline: features, clustering, PCA, "
                                   "ranking, calibration, plots, report")
    _add_config_flags(p, with_seed=True)

    p = sub.add_parser("features", help="wavelet/MFD features and the scaled matrix")
    _add_config_flags(p, with_seed=True)

    p = sub.add_parser("cluster", help="cluster a previously emitted feature matrix")
    _add_config_flags(p, with_seed=True)
    p.add_argument("--method", choices=METHODS + ("all",), default="all")

    p = sub.add_parser("pca", help="principal components of the feature matrix")
    _add_config_flags(p, with_seed=True)

    p = sub.add_parser("rank", help="priority-rank clusters from PCA scores")
    _add_config_flags(p, with_seed=True)

    p = sub.add_parser("calibrate", help="NSE and R^2 for observed/simulated flows")
    _add_config_flags(p, with_seed=True)

    p = sub.add_parser("plot", help="render SVG plots from emitted artifacts")
    _add_config_flags(p, with_seed=True)
    p.add_argument("--with-wavelet", action="store_true",
                   help="also render wavelet heatmaps (needs --manifest)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out_dir: Path | None = None

    if args.command == "plot" and not args.out:
        print("producible plots:")
        for name, what in available_plots().items():
            print(f"  {name}: {what}")
        return 0

    try:
        need_manifest = args.command in ("run", "features", "calibrate") or (
            args.command == "plot" and getattr(args, "with_wavelet", False))
        config = _build_config(args, need_manifest=need_manifest)
        out_dir = config.out_dir

        if args.command == "run":
            report = run_pipeline(config)
            print(f"report written to {config.out_dir / 'report.json'} "
                  f"(k = {report['k']}, ranking {' > '.join(report['ranking'])})")
        elif args.command == "features":
            matrix = run_features(config)
            print(f"features.csv written: {matrix.n_rows} catchments x "
                  f"{matrix.n_cols} features ({matrix.scaling})")
        elif args.command == "cluster":
            methods = METHODS if args.method == "all" else (args.method,)
            if "kmeans" not in methods:
                methods = ("kmeans",) + tuple(methods)  # reference for alignment
            bundle = run_cluster(config, methods=methods)
            print(f"clusters.csv written (k = {bundle['meta']['k']})")
        elif args.command == "pca":
            result = run_pca_stage(config)
            explained = ", ".join(f"{v:.1%}" for v in result.explained[:4])
            print(f"pca tables written (explained: {explained})")
        elif args.command == "rank":
            ranked = run_rank(config)
            print("ranking: " + " > ".join(rc.letter for rc in ranked))
        elif args.command == "calibrate":
            scores = run_calibrate(config)
            accepted = sum(1 for s in scores if s.accepted)
            print(f"calibration.csv written ({accepted}/{len(scores)} accepted)")
            for s in scores:
                if s.negative_slope:
                    sys.stderr.write(f"warning: {s.catchment_id} has a negative "
                                     f"obs/sim slope; R^2 hides the sign\n")
        elif args.command == "plot":
            written = run_plots(config, with_wavelet=args.with_wavelet)
            print(f"{len(written)} plot(s) written")
        return 0
    except ConfigError as exc:
        _error_record(exc, out_dir)
        return 2
    except (DataError, SewerclustError) as exc:
        _error_record(exc, out_dir)
        return 1
    except OSError as exc:
        _error_record(exc, out_dir)
        return 2


if __name__ == "__main__":
    sys.exit(main())
