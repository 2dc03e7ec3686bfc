"""Stage functions behind the CLI: tile, label, split and evaluate.

Stages fan work out over a thread pool but always merge results in sorted
key order, so output bytes do not depend on the worker count.
"""

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import evaluate
from .config import PipelineConfig
from .labels import AnnotationPolygon, LabelError, TileLabel, group_by_subframe, vote_tile
from .manifest import Exclusion, TileRecord
from .raster import (
    Observation,
    RasterError,
    SeasonTag,
    TileGeometry,
    apply_black_pixel_rule,
    load_observation,
    partition_tiles,
    subframe_grid,
    subframe_retained,
)
from .split import FOLDS, assign_folds, leakage_audit, record_pixels

logger = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    pass


class InputError(ValueError):
    """Bad or missing user input (maps to exit code 2)."""


def _map(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def find_sidecars(obs_dir) -> list[Path]:
    obs_dir = Path(obs_dir)
    if not obs_dir.is_dir():
        raise InputError(f"{obs_dir}: not a directory")
    return sorted(p for p in obs_dir.glob("*.json") if not p.name.endswith(".meta.json"))


def load_observations(obs_dir, workers: int = 1) -> list[Observation]:
    sidecars = find_sidecars(obs_dir)
    if not sidecars:
        raise InputError(f"{obs_dir}: no observations found")

    def load(path):
        try:
            return load_observation(path)
        except RasterError as exc:
            return exc

    loaded = _map(load, sidecars, workers)
    errors = [str(x) for x in loaded if isinstance(x, Exception)]
    if errors:
        raise InputError("; ".join(errors))
    ids = Counter(o.id for o in loaded)
    dupes = sorted(i for i, n in ids.items() if n > 1)
    if dupes:
        raise InputError(f"duplicate observation ids: {', '.join(dupes)}")
    return sorted(loaded, key=lambda o: o.id)


@dataclass
class TileStageResult:
    records: list[TileRecord]
    exclusions: list[Exclusion]
    subframes: dict = field(default_factory=dict)

    def summary(self) -> dict:
        kept_sf = sum(1 for s in self.subframes.values() if s["retained"])
        return {
            "subframes_total": len(self.subframes),
            "subframes_kept": kept_sf,
            "subframes_discarded_invalid": len(self.subframes) - kept_sf,
            "tiles": len(self.records),
        }


def _tile_observation(obs: Observation, cfg: PipelineConfig):
    records, exclusions, subframes = [], [], {}
    for sf in subframe_grid(obs, cfg.subframe_size):
        retained = subframe_retained(sf, cfg.max_invalid)
        subframes[sf.id] = {
            "observation_id": obs.id,
            "origin": [sf.origin_row, sf.origin_col],
            "shape": [sf.actual_rows, sf.actual_cols],
            "invalid_fraction": sf.invalid_fraction,
            "retained": retained,
            "season_tag": obs.season_tag.value,
        }
        if not retained:
            exclusions.append(
                Exclusion(sf.id, "subframe", obs.id, sf.id, "invalid_subframe", f"invalid_fraction={sf.invalid_fraction!r}")
            )
            continue
        for tile in partition_tiles(sf, cfg.tile_size):
            records.append(
                TileRecord(
                    tile_id=tile.id,
                    observation_id=obs.id,
                    subframe_id=sf.id,
                    site_id=obs.site_id,
                    center_lat=obs.center_lat,
                    center_lon=obs.center_lon,
                    season_tag=obs.season_tag.value,
                    row0=sf.origin_row + tile.row0,
                    col0=sf.origin_col + tile.col0,
                    tile_size=tile.size,
                    black_fraction=tile.black_fraction,
                )
            )
    return records, exclusions, subframes


def run_tile(observations, cfg: PipelineConfig, workers: int = 1) -> TileStageResult:
    """Partition every observation into subframes and candidate tiles."""
    results = _map(lambda o: _tile_observation(o, cfg), sorted(observations, key=lambda o: o.id), workers)
    out = TileStageResult([], [], {})
    for records, exclusions, subframes in results:
        out.records.extend(records)
        out.exclusions.extend(exclusions)
        out.subframes.update(subframes)
    out.records.sort(key=lambda r: r.tile_id)
    out.exclusions.sort(key=lambda e: e.item_id)
    out.subframes = dict(sorted(out.subframes.items()))
    return out


def _geometry(rec: TileRecord, sf_meta: dict) -> TileGeometry:
    r0, c0 = sf_meta["origin"]
    return TileGeometry(
        rec.subframe_id, (rec.row0 - r0) // rec.tile_size, (rec.col0 - c0) // rec.tile_size, rec.tile_size, rec.black_fraction
    )


@dataclass
class LabelStageResult:
    records: list[TileRecord]
    exclusions: list[Exclusion]

    def summary(self) -> dict:
        labels = Counter(r.label for r in self.records)
        reasons = Counter(e.reason for e in self.exclusions)
        return {
            "kept": len(self.records),
            "frost": labels.get("frost", 0),
            "background": labels.get("background", 0),
            "excluded_ambiguous_vote": reasons.get("ambiguous_vote", 0),
            "excluded_black_rule": reasons.get("black_rule", 0),
        }


def check_annotations(polygons: list[AnnotationPolygon], subframes: dict) -> None:
    for poly in polygons:
        meta = subframes.get(poly.subframe_id)
        if meta is None:
            raise LabelError(f"annotation by {poly.annotator_id} references unknown subframe {poly.subframe_id}")
        rows, cols = meta["shape"]
        if not poly.within(rows, cols):
            raise LabelError(
                f"polygon by {poly.annotator_id} on {poly.subframe_id} leaves the subframe bounds {rows}x{cols}"
            )


def run_label(
    records: list[TileRecord],
    polygons: list[AnnotationPolygon],
    subframes: dict,
    cfg: PipelineConfig,
    workers: int = 1,
) -> LabelStageResult:
    """Vote a label (and context) for every candidate tile and apply the black-pixel rule."""
    check_annotations(polygons, subframes)
    grouped = group_by_subframe(polygons)
    by_subframe: dict[str, list[TileRecord]] = {}
    for rec in records:
        by_subframe.setdefault(rec.subframe_id, []).append(rec)

    def label_subframe(sf_id):
        sf_meta = subframes[sf_id]
        season = SeasonTag(sf_meta["season_tag"])
        polys = grouped.get(sf_id, {})
        kept, excluded = [], []
        for rec in by_subframe[sf_id]:
            tile = _geometry(rec, sf_meta)
            vote = vote_tile(tile, polys, cfg.vote, season)
            if vote.label == TileLabel.EXCLUDED_AMBIGUOUS:
                excluded.append(
                    Exclusion(rec.tile_id, "tile", rec.observation_id, sf_id, "ambiguous_vote", f"k={vote.k}")
                )
                continue
            if not apply_black_pixel_rule(tile, vote.label, cfg.max_black, cfg.black_rule_all_tiles):
                excluded.append(
                    Exclusion(
                        rec.tile_id, "tile", rec.observation_id, sf_id, "black_rule", f"black_fraction={rec.black_fraction!r}"
                    )
                )
                continue
            rec = TileRecord(**{**rec.__dict__})
            rec.label = vote.label.value
            rec.context = vote.context.value if vote.context else ""
            rec.annotators = ";".join(sorted(vote.supporters))
            rec.vote_tally = vote.tally()
            if vote.label == TileLabel.FROST:
                rec.context_tie_broken = "yes" if vote.context_tie_broken else "no"
            kept.append(rec)
        return kept, excluded

    out = LabelStageResult([], [])
    for kept, excluded in _map(label_subframe, sorted(by_subframe), workers):
        out.records.extend(kept)
        out.exclusions.extend(excluded)
    out.records.sort(key=lambda r: r.tile_id)
    out.exclusions.sort(key=lambda e: e.item_id)
    return out


def run_split(records: list[TileRecord], cfg: PipelineConfig):
    """Assign folds in place; returns ``(assignment, audit)``."""
    spec = cfg.folds
    assignment = assign_folds(records, spec)
    for rec, pixel in zip(records, record_pixels(records, spec.nside, spec.scheme)):
        rec.healpix_pixel = pixel
        rec.healpix_scheme = spec.scheme.value
        rec.nside = spec.nside
        rec.fold = assignment.fold_of(pixel).value
    return assignment, leakage_audit(records, assignment)


class ObservationTileSource:
    """Crops tile pixels out of the observation rasters on demand."""

    def __init__(self, obs_dir):
        self._sidecars = {}
        for path in find_sidecars(obs_dir):
            obs = load_observation(path)
            self._sidecars[obs.id] = obs

    def __call__(self, rec: TileRecord):
        obs = self._sidecars.get(rec.observation_id)
        if obs is None:
            raise InputError(f"no raster for observation {rec.observation_id} (tile {rec.tile_id})")
        return obs.pixels[rec.row0 : rec.row0 + rec.tile_size, rec.col0 : rec.col0 + rec.tile_size]


def require_stage(records: list[TileRecord], needs_label: bool = True, needs_fold: bool = True) -> None:
    if needs_label and any(not r.label for r in records):
        raise InputError("manifest has unlabeled tiles; run `frostgrid label` first")
    if needs_fold and any(not r.fold for r in records):
        raise InputError("manifest has no fold column values; run `frostgrid split` before evaluating")


def build_report(records, predictions: dict, cfg: PipelineConfig, pixel_source=None) -> dict:
    """Accuracy, recall curves and context tables per fold, plus intensity shift."""
    require_stage(records)
    known = {r.tile_id for r in records}
    unknown = sorted(set(predictions) - known)
    if unknown:
        shown = ", ".join(unknown[:20]) + (" ..." if len(unknown) > 20 else "")
        raise InputError(f"{len(unknown)} prediction(s) for tiles not in the manifest: {shown}")
    grid = evaluate.default_thresholds(cfg.threshold_count)
    folds = {}
    for fold in FOLDS:
        in_fold = [r for r in records if r.fold == fold.value]
        if not in_fold:
            folds[fold.value] = {"tiles": 0, "notice": "fold is empty"}
            continue
        entry = {
            "tiles": len(in_fold),
            "accuracy": evaluate.accuracy(predictions, records, fold, cfg.decision_threshold),
            "confusion": evaluate.confusion_matrix(predictions, records, fold, cfg.decision_threshold),
            "context_distribution": evaluate.context_distribution(records, fold).to_dict(),
        }
        if any(r.label == "frost" for r in in_fold):
            curves = evaluate.recall_by_context(predictions, records, fold, grid)
            entry["recall_curves"] = [c.to_dict() for c in curves]
        else:
            entry["recall_curves"] = []
        folds[fold.value] = entry

    report = {
        "config_hash": cfg.hash,
        "decision_threshold": cfg.decision_threshold,
        "threshold_grid": {"start": 0.0, "stop": 1.0, "count": cfg.threshold_count},
        "folds": folds,
        "context_table": evaluate.format_context_table(
            [evaluate.context_distribution(records, f) for f in FOLDS if folds[f.value]["tiles"]]
        ),
    }
    if pixel_source is not None:
        report["intensity_shift"] = shift_section(records, pixel_source, cfg)
    return report


def shift_section(records, pixel_source, cfg: PipelineConfig) -> dict:
    out = {}
    for name, context in (("all_tiles", None), ("dunes", "dunes")):
        try:
            rep = evaluate.intensity_shift(
                records, pixel_source, "train", "test", context, cfg.histogram_include_invalid
            )
        except evaluate.PredictionError as exc:
            out[name] = {"skipped": str(exc)}
            continue
        out[name] = rep.to_dict()
    return out
