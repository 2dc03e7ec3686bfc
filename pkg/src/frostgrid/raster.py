"""Observation -> subframe -> tile partitioning.

Observations are single-band 8-bit map-projected rasters in which intensity 0
is the no-data fill. Subframe grids are anchored at the observation origin;
edge subframes may be partial, edge tiles are always dropped.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image

logger = logging.getLogger(__name__)

SUBFRAME_SIZE = 5120
MAX_INVALID_FRACTION = 0.75
TILE_SIZE = 299
MAX_BLACK_FRACTION = 0.10


class RasterError(ValueError):
    """Malformed raster or sidecar input."""


class SeasonTag(str, Enum):
    WINTER_CANDIDATE = "winter_candidate"
    SUMMER_NEGATIVE = "summer_negative"
    UNSPECIFIED = "unspecified"


@dataclass(eq=False)
class Observation:
    id: str
    pixels: np.ndarray = field(repr=False)
    site_id: str
    center_lat: float
    center_lon: float
    season_tag: SeasonTag = SeasonTag.UNSPECIFIED
    valid_mask: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.season_tag = SeasonTag(self.season_tag)
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 2:
            raise RasterError(f"{self.id}: expected a single-band 2-D raster, got shape {pixels.shape}")
        if pixels.size == 0:
            raise RasterError(f"{self.id}: empty observation")
        if pixels.dtype != np.uint8:
            if pixels.dtype.kind not in "iu" or pixels.min() < 0 or pixels.max() > 255:
                raise RasterError(f"{self.id}: pixel data must be 8-bit unsigned")
            pixels = pixels.astype(np.uint8)
        self.pixels = pixels
        if self.valid_mask is not None:
            mask = np.asarray(self.valid_mask).astype(bool)
            if mask.shape != pixels.shape:
                raise RasterError(f"{self.id}: mask shape {mask.shape} != raster shape {pixels.shape}")
            self.valid_mask = mask

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def validity(self) -> np.ndarray:
        if self.valid_mask is not None:
            return self.valid_mask
        return self.pixels != 0


@dataclass(frozen=True)
class Subframe:
    observation_id: str
    origin_row: int
    origin_col: int
    size: int
    actual_rows: int
    actual_cols: int
    valid_count: int
    pixels: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def id(self) -> str:
        return f"{self.observation_id}_sf{self.origin_row // self.size:03d}_{self.origin_col // self.size:03d}"

    @property
    def valid_fraction(self) -> float:
        return self.valid_count / self.pixel_count

    @property
    def invalid_fraction(self) -> float:
        # integer ratio, so a value exactly at the threshold compares equal
        return (self.pixel_count - self.valid_count) / self.pixel_count

    @property
    def pixel_count(self) -> int:
        return self.actual_rows * self.actual_cols


@dataclass(frozen=True)
class TileGeometry:
    subframe_id: str
    row_index: int
    col_index: int
    size: int
    black_fraction: float

    @property
    def id(self) -> str:
        return f"{self.subframe_id}_t{self.row_index:03d}_{self.col_index:03d}"

    @property
    def row0(self) -> int:
        return self.row_index * self.size

    @property
    def col0(self) -> int:
        return self.col_index * self.size

    @property
    def window(self) -> tuple[int, int, int, int]:
        """``(row_start, col_start, row_stop, col_stop)`` in subframe pixels."""
        return self.row0, self.col0, self.row0 + self.size, self.col0 + self.size


def subframe_grid(obs: Observation, size: int = SUBFRAME_SIZE) -> list[Subframe]:
    """Every grid subframe of ``obs``, retained or not, in row-major order."""
    if size < 1:
        raise ValueError("subframe size must be >= 1")
    validity = obs.validity()
    out = []
    for r0 in range(0, obs.height, size):
        for c0 in range(0, obs.width, size):
            block = obs.pixels[r0 : r0 + size, c0 : c0 + size]
            valid = validity[r0 : r0 + size, c0 : c0 + size]
            rows, cols = block.shape
            out.append(
                Subframe(
                    observation_id=obs.id,
                    origin_row=r0,
                    origin_col=c0,
                    size=size,
                    actual_rows=rows,
                    actual_cols=cols,
                    valid_count=int(np.count_nonzero(valid)),
                    pixels=block,
                )
            )
    return out


def subframe_retained(sf: Subframe, max_invalid: float = MAX_INVALID_FRACTION) -> bool:
    return sf.invalid_fraction <= max_invalid


def partition_subframes(
    obs: Observation, size: int = SUBFRAME_SIZE, max_invalid: float = MAX_INVALID_FRACTION
) -> list[Subframe]:
    """Grid subframes whose invalid (no-data) fraction is at most ``max_invalid``."""
    return [sf for sf in subframe_grid(obs, size) if subframe_retained(sf, max_invalid)]


def partition_tiles(sf: Subframe, size: int = TILE_SIZE) -> list[TileGeometry]:
    """Full ``size`` x ``size`` tiles of a subframe in row-major order.

    Black fraction is the share of zero-valued pixels in the tile.
    """
    if size < 1:
        raise ValueError("tile size must be >= 1")
    if sf.pixels is None:
        raise ValueError(f"subframe {sf.id} carries no pixel data")
    n_rows = sf.actual_rows // size
    n_cols = sf.actual_cols // size
    if n_rows == 0 or n_cols == 0:
        return []
    block = sf.pixels[: n_rows * size, : n_cols * size]
    zeros = (block == 0).reshape(n_rows, size, n_cols, size).sum(axis=(1, 3))
    area = size * size
    return [
        TileGeometry(sf.id, i, j, size, int(zeros[i, j]) / area)
        for i in range(n_rows)
        for j in range(n_cols)
    ]


def apply_black_pixel_rule(
    tile: TileGeometry, label, max_black: float = MAX_BLACK_FRACTION, all_tiles: bool = False
) -> bool:
    """True if the tile is kept.

    Only frost tiles are subject to the rule unless ``all_tiles`` is set.
    """
    if label != "frost" and not all_tiles:
        return True
    return tile.black_fraction <= max_black


def tile_pixels(sf: Subframe, tile: TileGeometry) -> np.ndarray:
    r0, c0, r1, c1 = tile.window
    return sf.pixels[r0:r1, c0:c1]


def max_subframes(obs: Observation, size: int = SUBFRAME_SIZE) -> int:
    return math.ceil(obs.height / size) * math.ceil(obs.width / size)


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) 8-bit PGM into a ``uint8`` array."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            if img.format != "PPM" or img.mode != "L":
                raise RasterError(f"{path}: expected 8-bit grayscale PGM, got {img.format} {img.mode}")
            return np.array(img, dtype=np.uint8)
    except (OSError, SyntaxError) as exc:
        raise RasterError(f"{path}: unreadable raster ({exc})") from exc


def write_pgm(path, pixels: np.ndarray) -> None:
    pixels = np.asarray(pixels)
    if pixels.ndim != 2 or pixels.dtype != np.uint8:
        raise RasterError("write_pgm expects a 2-D uint8 array")
    Image.fromarray(pixels, mode="L").save(Path(path), format="PPM")


def load_observation(sidecar_path) -> Observation:
    """Load an observation from its JSON sidecar and the PGM next to it.

    The sidecar holds ``id, site_id, center_lat, center_lon, season_tag`` and
    optionally ``mask_path`` (PGM, nonzero = valid) and ``raster_path``;
    paths are relative to the sidecar's directory.
    """
    sidecar_path = Path(sidecar_path)
    try:
        meta = json.loads(sidecar_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise RasterError(f"{sidecar_path}: unreadable sidecar ({exc})") from exc
    missing = [k for k in ("id", "site_id", "center_lat", "center_lon") if k not in meta]
    if missing:
        raise RasterError(f"{sidecar_path}: sidecar missing {', '.join(missing)}")
    base = sidecar_path.parent
    raster_path = base / meta.get("raster_path", sidecar_path.with_suffix(".pgm").name)
    mask = None
    if meta.get("mask_path"):
        mask = read_pgm(base / meta["mask_path"]) != 0
    try:
        season = SeasonTag(meta.get("season_tag", SeasonTag.UNSPECIFIED))
        return Observation(
            id=str(meta["id"]),
            pixels=read_pgm(raster_path),
            site_id=str(meta["site_id"]),
            center_lat=float(meta["center_lat"]),
            center_lon=float(meta["center_lon"]),
            season_tag=season,
            valid_mask=mask,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, RasterError):
            raise
        raise RasterError(f"{sidecar_path}: {exc}") from exc
