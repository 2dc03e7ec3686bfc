"""Command-line entry point.

Exit codes: 0 ok, 1 runtime failure (including a failed leakage audit),
2 usage or input error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from . import evaluate, healpix, pipeline
from .config import ConfigError, PipelineConfig, load_config
from .fixture import build_fixture
from .labels import LabelError, load_annotations
from .manifest import ManifestError, read_exclusions, read_manifest, write_exclusions, write_manifest
from .raster import RasterError
from .report import dump_json, write_bundle
from .split import SplitError

logger = logging.getLogger("frostgrid")

INPUT_ERRORS = (
    pipeline.InputError,
    ConfigError,
    ManifestError,
    LabelError,
    RasterError,
    SplitError,
    evaluate.PredictionError,
    FileNotFoundError,
)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline configuration (overrides --config)")
    g.add_argument("--config", type=Path, help="TOML or JSON pipeline config")
    g.add_argument("--seed", type=int, help="tie-break seed for equal-count pixels in fold assignment")
    g.add_argument("--workers", type=int, default=1, help="worker threads (output is identical for any value)")
    g.add_argument("--subframe-size", type=int)
    g.add_argument("--max-invalid", type=float)
    g.add_argument("--tile-size", type=int)
    g.add_argument("--max-black", type=float)
    g.add_argument("--black-rule-all-tiles", action="store_const", const=True)
    g.add_argument("--annotator-count", type=int)
    g.add_argument("--majority-threshold", type=int)
    g.add_argument("--overlap-rule", choices=["any_intersection", "min_area_fraction"])
    g.add_argument("--min-area-fraction", type=float)
    g.add_argument("--zero-overlap", choices=["background", "exclude"])
    g.add_argument("--nside", type=int)
    g.add_argument("--scheme", choices=["ring", "nested"])
    g.add_argument("--ratios", type=float, nargs=3, metavar=("TRAIN", "VAL", "TEST"))
    g.add_argument("--threshold-count", type=int)
    g.add_argument("--decision-threshold", type=float)
    g.add_argument("--include-invalid-pixels", dest="histogram_include_invalid", action="store_const", const=True)


_OVERRIDES = (
    "seed", "subframe_size", "max_invalid", "tile_size", "max_black", "black_rule_all_tiles",
    "annotator_count", "majority_threshold", "overlap_rule", "min_area_fraction", "zero_overlap",
    "nside", "scheme", "ratios", "threshold_count", "decision_threshold", "histogram_include_invalid",
)


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    return cfg.with_overrides(**{k: getattr(args, k, None) for k in _OVERRIDES})


def _load_stage(path, cfg: PipelineConfig, stage: str):
    records, meta = read_manifest(path)
    if meta["config_hash"] != cfg.hash:
        raise ConfigError(
            f"{path} was produced with config {meta['config_hash']} but the current config is {cfg.hash}; "
            "pass the same --config/flags to every stage"
        )
    return records, meta


def cmd_tile(args) -> int:
    cfg = _config(args)
    observations = pipeline.load_observations(args.observations, args.workers)
    result = pipeline.run_tile(observations, cfg, args.workers)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_manifest(
        args.out_dir / "tiles.csv",
        result.records,
        "tile",
        cfg.hash,
        {"subframes": result.subframes, "config": cfg.to_dict()},
    )
    write_exclusions(args.out_dir / "exclusions_tile.csv", result.exclusions, "tile", cfg.hash)
    s = result.summary()
    print(
        f"tile: {len(observations)} observations, {s['subframes_total']} subframes "
        f"({s['subframes_kept']} kept, {s['subframes_discarded_invalid']} discarded invalid_subframe), "
        f"{s['tiles']} candidate tiles [config {cfg.hash}]"
    )
    return 0


def cmd_label(args) -> int:
    cfg = _config(args)
    records, meta = _load_stage(args.manifest, cfg, "tile")
    if meta["stage"] != "tile":
        raise pipeline.InputError(f"{args.manifest} is a '{meta['stage']}' manifest; label expects tiles.csv")
    tile_exclusions = read_exclusions(args.manifest.with_name("exclusions_tile.csv"))
    polygons = load_annotations(args.annotations)
    result = pipeline.run_label(records, polygons, meta["subframes"], cfg, args.workers)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out / "labeled.csv", result.records, "label", cfg.hash, {"subframes": meta["subframes"]})
    exclusions = sorted(tile_exclusions + result.exclusions, key=lambda e: e.item_id)
    write_exclusions(out / "exclusions.csv", exclusions, "label", cfg.hash)
    s = result.summary()
    print(
        f"label: {s['kept']} tiles kept ({s['frost']} frost, {s['background']} background); "
        f"excluded {s['excluded_ambiguous_vote']} ambiguous_vote, {s['excluded_black_rule']} black_rule, "
        f"{len(tile_exclusions)} invalid_subframe"
    )
    return 0


def cmd_split(args) -> int:
    cfg = _config(args)
    records, meta = _load_stage(args.manifest, cfg, "label")
    pipeline.require_stage(records, needs_label=True, needs_fold=False)
    assignment, audit = pipeline.run_split(records, cfg)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out / "manifest.csv", records, "split", cfg.hash, {"assignment": assignment.to_dict()})
    dump_json({"config_hash": cfg.hash, "assignment": assignment.to_dict(), "audit": audit.to_dict()}, out / "split_audit.json")
    counts = assignment.tile_counts()
    achieved = assignment.achieved()
    print(
        "split: "
        + ", ".join(f"{f.value} {counts[f]} ({100 * achieved[f]:.1f}%)" for f in counts)
        + f"; leakage audit {'PASS' if audit.passed else 'FAIL'}"
    )
    return 0 if audit.passed else 1


def _report(args, cfg):
    records, _ = _load_stage(args.manifest, cfg, "split")
    predictions = evaluate.read_predictions(args.predictions)
    source = pipeline.ObservationTileSource(args.observations) if args.observations else None
    report = pipeline.build_report(records, predictions, cfg, source)
    report["manifest"] = str(args.manifest.name)
    return report


def cmd_eval(args) -> int:
    cfg = _config(args)
    report = _report(args, cfg)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    dump_json(report, args.out)
    accs = {f: v["accuracy"] for f, v in report["folds"].items() if "accuracy" in v}
    print("eval: " + ", ".join(f"{f} accuracy {a:.4f}" for f, a in accs.items()))
    return 0


def cmd_report(args) -> int:
    cfg = _config(args)
    report = _report(args, cfg)
    paths = write_bundle(report, args.out_dir)
    print(report["context_table"], end="")
    print(f"report: wrote {len(paths)} files to {args.out_dir}")
    return 0


def cmd_run(args) -> int:
    """All stages in sequence into one directory."""
    out = args.out_dir
    ns = argparse.Namespace(**vars(args))
    ns.out_dir = out
    cmd_tile(ns)
    ns.manifest = out / "tiles.csv"
    cmd_label(ns)
    ns.manifest = out / "labeled.csv"
    status = cmd_split(ns)
    if status:
        return status
    ns.manifest = out / "manifest.csv"
    ns.out_dir = out / "report"
    return cmd_report(ns)


def cmd_healpix_lookup(args) -> int:
    pix = healpix.latlon_to_pixel(args.nside, args.lat, args.lon, args.scheme)
    lat, lon = healpix.pixel_to_latlon(args.nside, pix, args.scheme)
    print(json.dumps({"nside": args.nside, "scheme": args.scheme, "pixel": pix, "center_lat": float(lat), "center_lon": float(lon)}))
    return 0


def cmd_fixture(args) -> int:
    design = build_fixture(args.out_dir, args.fixture_seed)
    print(f"fixture: wrote {args.out_dir} (site folds {design['site_folds']})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frostgrid", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tile", help="cut observations into subframes and candidate tiles")
    p.add_argument("observations", type=Path, help="directory of PGM rasters with JSON sidecars")
    p.add_argument("--out-dir", type=Path, required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_tile)

    p = sub.add_parser("label", help="majority-vote tile labels from annotation polygons")
    p.add_argument("--manifest", type=Path, required=True, help="tiles.csv from the tile stage")
    p.add_argument("--annotations", type=Path, required=True, help="JSON Lines polygons")
    p.add_argument("--out-dir", type=Path, required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("split", help="assign HEALPix-grouped folds and audit leakage")
    p.add_argument("--manifest", type=Path, required=True, help="labeled.csv from the label stage")
    p.add_argument("--out-dir", type=Path, required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_split)

    for name, func, helptext in (
        ("eval", cmd_eval, "compute metrics into a JSON report"),
        ("report", cmd_report, "write the JSON report plus CSV tables and SVG plots"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--manifest", type=Path, required=True, help="manifest.csv from the split stage")
        p.add_argument("--predictions", type=Path, required=True, help="CSV with header tile_id,score")
        p.add_argument("--observations", type=Path, help="raster directory, enables intensity-shift histograms")
        if name == "eval":
            p.add_argument("--out", type=Path, required=True)
        else:
            p.add_argument("--out-dir", type=Path, required=True)
        _add_config_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("run", help="tile, label, split and report in one go")
    p.add_argument("observations", type=Path)
    p.add_argument("--annotations", type=Path, required=True)
    p.add_argument("--predictions", type=Path, required=True)
    p.add_argument("--out-dir", type=Path, required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("healpix", help="HEALPix diagnostics")
    hsub = p.add_subparsers(dest="healpix_command", required=True)
    q = hsub.add_parser("lookup", help="pixel containing a latitude/longitude")
    q.add_argument("--lat", type=float, required=True, help="degrees north")
    q.add_argument("--lon", type=float, required=True, help="degrees east")
    q.add_argument("--nside", type=int, default=8)
    q.add_argument("--scheme", choices=["ring", "nested"], default="ring")
    q.set_defaults(func=cmd_healpix_lookup)

    p = sub.add_parser("fixture", help="write the bundled synthetic fixture")
    p.add_argument("out_dir", type=Path)
    p.add_argument("--fixture-seed", type=int, default=20220531)
    p.set_defaults(func=cmd_fixture)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"frostgrid {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        logger.debug("unhandled error", exc_info=True)
        print(f"frostgrid {args.command}: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
