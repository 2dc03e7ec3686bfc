"""Tile manifest and exclusions files.

The manifest is a CSV with a fixed header (documented by
``schemas/manifest.schema.json``). Each CSV is accompanied by a
``<name>.meta.json`` recording the producing stage, the config hash and the
SHA-256 of the CSV bytes, which is how edited manifests are detected.
"""

import csv
import hashlib
import io
import json
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path


class ManifestError(ValueError):
    pass


@dataclass
class TileRecord:
    tile_id: str
    observation_id: str
    subframe_id: str
    site_id: str
    center_lat: float
    center_lon: float
    season_tag: str
    # tile window in observation pixel coordinates
    row0: int
    col0: int
    tile_size: int
    black_fraction: float
    label: str = ""
    context: str = ""
    annotators: str = ""
    vote_tally: str = ""
    context_tie_broken: str = ""
    healpix_pixel: int | None = None
    healpix_scheme: str = ""
    nside: int | None = None
    fold: str = ""
    config_hash: str = ""


MANIFEST_COLUMNS = tuple(f.name for f in fields(TileRecord))
_INT_COLUMNS = {"row0", "col0", "tile_size", "healpix_pixel", "nside"}
_FLOAT_COLUMNS = {"center_lat", "center_lon", "black_fraction"}

EXCLUSION_COLUMNS = ("item_id", "level", "observation_id", "subframe_id", "reason", "detail", "config_hash")
EXCLUSION_REASONS = ("invalid_subframe", "ambiguous_vote", "black_rule")


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(getattr(value, "value", value))


def _parse(name: str, text: str):
    if name in _INT_COLUMNS:
        return int(text) if text != "" else None
    if name in _FLOAT_COLUMNS:
        return float(text)
    return text


def manifest_schema() -> dict:
    text = resources.files("frostgrid").joinpath("schemas/manifest.schema.json").read_text()
    return json.loads(text)


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def _write_csv(path: Path, header, rows, stage: str, config_hash: str, extra_meta=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    data = buf.getvalue().encode()
    path.write_bytes(data)
    digest = hashlib.sha256(data).hexdigest()
    meta = {"stage": stage, "config_hash": config_hash, "sha256": digest, "rows": len(rows)}
    meta.update(extra_meta or {})
    _meta_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return digest


def read_meta(path) -> dict:
    path = Path(path)
    meta_path = _meta_path(path)
    if not meta_path.exists():
        raise ManifestError(f"{path}: missing {meta_path.name}; regenerate with the pipeline")
    return json.loads(meta_path.read_text())


def verify(path) -> dict:
    """Check the file against its recorded digest and return the metadata."""
    path = Path(path)
    meta = read_meta(path)
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    if digest != meta.get("sha256"):
        raise ManifestError(f"{path}: contents do not match recorded digest (manifest was modified)")
    return meta


def write_manifest(path, records, stage: str, config_hash: str, extra_meta=None) -> str:
    rows = []
    for rec in records:
        rec.config_hash = config_hash
        rows.append([_format(getattr(rec, c)) for c in MANIFEST_COLUMNS])
    return _write_csv(Path(path), MANIFEST_COLUMNS, rows, stage, config_hash, extra_meta)


def read_manifest(path, check_digest: bool = True) -> tuple[list[TileRecord], dict]:
    path = Path(path)
    meta = verify(path) if check_digest else read_meta(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != MANIFEST_COLUMNS:
            raise ManifestError(f"{path}: unexpected header {reader.fieldnames}")
        records = []
        for lineno, row in enumerate(reader, 2):
            try:
                records.append(TileRecord(**{c: _parse(c, row[c]) for c in MANIFEST_COLUMNS}))
            except (TypeError, ValueError) as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from exc
    ids = [r.tile_id for r in records]
    if len(set(ids)) != len(ids):
        raise ManifestError(f"{path}: duplicate tile ids")
    for rec in records:
        if rec.config_hash != meta["config_hash"]:
            raise ManifestError(f"{path}: row {rec.tile_id} carries config hash {rec.config_hash}")
    return records, meta


@dataclass(frozen=True)
class Exclusion:
    item_id: str
    level: str
    observation_id: str
    subframe_id: str
    reason: str
    detail: str = ""

    def __post_init__(self):
        if self.reason not in EXCLUSION_REASONS:
            raise ValueError(f"unknown exclusion reason {self.reason}")


def write_exclusions(path, exclusions, stage: str, config_hash: str) -> str:
    rows = [
        [e.item_id, e.level, e.observation_id, e.subframe_id, e.reason, e.detail, config_hash]
        for e in exclusions
    ]
    return _write_csv(Path(path), EXCLUSION_COLUMNS, rows, stage, config_hash)


def read_exclusions(path) -> list[Exclusion]:
    path = Path(path)
    verify(path)
    with open(path, newline="") as fh:
        return [
            Exclusion(r["item_id"], r["level"], r["observation_id"], r["subframe_id"], r["reason"], r["detail"])
            for r in csv.DictReader(fh)
        ]
