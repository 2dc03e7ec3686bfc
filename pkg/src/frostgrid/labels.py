"""Annotation polygons and per-tile majority voting.

Votes are counted per annotator, not per polygon: an annotator supports a
tile if any of their polygons overlaps it. For the geologic context each
supporting annotator votes once, using their polygon with the largest
intersection area.
"""

import json
import logging
from collections import Counter, defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from . import geometry
from .raster import SeasonTag, TileGeometry

logger = logging.getLogger(__name__)

# intersections smaller than this share of the tile area count as contact only
AREA_EPSILON = 1e-12


class LabelError(ValueError):
    pass


class GeologicContext(str, Enum):
    DUNES = "dunes"
    GULLIES = "gullies"
    CRATER_RIM_WALL = "crater_rim_wall"
    OTHER = "other"


# tie-break order for context plurality votes, highest first
CONTEXT_PRIORITY = (
    GeologicContext.DUNES,
    GeologicContext.GULLIES,
    GeologicContext.CRATER_RIM_WALL,
    GeologicContext.OTHER,
)


class VisibleIndicator(str, Enum):
    UNIFORM_ALBEDO = "uniform_albedo"
    POLYGONAL_FEATURES = "polygonal_features"
    HALOS = "halos"
    DEFROSTING_MARKS = "defrosting_marks"


class TileLabel(str, Enum):
    FROST = "frost"
    BACKGROUND = "background"
    EXCLUDED_AMBIGUOUS = "excluded_ambiguous"


class OverlapRule(str, Enum):
    ANY_INTERSECTION = "any_intersection"
    MIN_AREA_FRACTION = "min_area_fraction"


class ZeroOverlapPolicy(str, Enum):
    BACKGROUND = "background"
    EXCLUDE = "exclude"


@dataclass(frozen=True)
class VoteConfig:
    annotator_count: int = 3
    majority_threshold: int = 2
    overlap_rule: OverlapRule = OverlapRule.ANY_INTERSECTION
    min_area_fraction: float = 0.5
    zero_overlap: ZeroOverlapPolicy = ZeroOverlapPolicy.BACKGROUND

    def __post_init__(self):
        object.__setattr__(self, "overlap_rule", OverlapRule(self.overlap_rule))
        object.__setattr__(self, "zero_overlap", ZeroOverlapPolicy(self.zero_overlap))
        if not 1 <= self.majority_threshold <= self.annotator_count:
            raise ValueError("need 1 <= majority_threshold <= annotator_count")
        if not 0.0 < self.min_area_fraction <= 1.0:
            raise ValueError("min_area_fraction must lie in (0, 1]")


@dataclass(frozen=True)
class AnnotationPolygon:
    subframe_id: str
    annotator_id: str
    vertices: tuple[tuple[float, float], ...]
    context: GeologicContext
    indicators: frozenset[VisibleIndicator] = field(default_factory=frozenset)

    def __post_init__(self):
        verts = tuple((float(r), float(c)) for r, c in self.vertices)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "context", GeologicContext(self.context))
        object.__setattr__(self, "indicators", frozenset(VisibleIndicator(i) for i in self.indicators))
        if len(verts) < 3:
            raise LabelError(f"polygon from {self.annotator_id} on {self.subframe_id} has < 3 vertices")
        if not self.indicators:
            raise LabelError(f"polygon from {self.annotator_id} on {self.subframe_id} lists no indicators")
        if not geometry.is_simple(verts):
            raise LabelError(
                f"self-intersecting polygon from {self.annotator_id} on {self.subframe_id}; repair it upstream"
            )

    @property
    def area(self) -> float:
        return geometry.polygon_area(self.vertices)

    def within(self, rows: int, cols: int) -> bool:
        return all(0 <= r <= rows and 0 <= c <= cols for r, c in self.vertices)


def intersection_area(poly: AnnotationPolygon, tile: TileGeometry) -> float:
    r0, c0, r1, c1 = tile.window
    return geometry.rect_intersection_area(poly.vertices, r0, c0, r1, c1)


def _overlap_area(poly, tile, cfg: VoteConfig) -> float:
    """Intersection area if ``poly`` counts as overlapping ``tile``, else 0."""
    tile_area = float(tile.size * tile.size)
    if poly.area <= AREA_EPSILON * tile_area:
        logger.warning("degenerate zero-area polygon from %s on %s", poly.annotator_id, poly.subframe_id)
        return 0.0
    area = intersection_area(poly, tile)
    if cfg.overlap_rule == OverlapRule.MIN_AREA_FRACTION:
        return area if area >= cfg.min_area_fraction * tile_area else 0.0
    return area if area > AREA_EPSILON * tile_area else 0.0


def polygon_overlaps_tile(
    poly: AnnotationPolygon,
    tile: TileGeometry,
    rule: OverlapRule = OverlapRule.ANY_INTERSECTION,
    min_area_fraction: float = 0.5,
) -> bool:
    """Whether ``poly`` overlaps ``tile`` with positive area (or at least
    ``min_area_fraction`` of the tile under the min-area rule)."""
    if poly.subframe_id != tile.subframe_id:
        raise LabelError(f"polygon on {poly.subframe_id} tested against tile of {tile.subframe_id}")
    cfg = VoteConfig(overlap_rule=rule, min_area_fraction=min_area_fraction)
    return _overlap_area(poly, tile, cfg) > 0.0


@dataclass(frozen=True)
class TileVote:
    label: TileLabel
    # annotator -> (context of their largest overlapping polygon, its area)
    supporters: dict = field(default_factory=dict)
    context: GeologicContext | None = None
    context_tie_broken: bool = False

    @property
    def k(self) -> int:
        return len(self.supporters)

    def tally(self) -> str:
        counts = Counter(ctx.value for ctx, _ in self.supporters.values())
        return ";".join(f"{c}:{counts[c]}" for c in sorted(counts))


def _check_sets(tile: TileGeometry, polygons_by_annotator: Mapping, cfg: VoteConfig | None):
    for annotator, polys in polygons_by_annotator.items():
        for poly in polys:
            if poly.annotator_id != annotator:
                raise LabelError(
                    f"polygon by {poly.annotator_id} filed under annotator {annotator}; "
                    "annotators must appear in exactly one set"
                )
            if poly.subframe_id != tile.subframe_id:
                raise LabelError(f"polygon on unknown subframe {poly.subframe_id} for tile {tile.id}")
    if cfg is not None and len(polygons_by_annotator) > cfg.annotator_count:
        raise LabelError(
            f"{len(polygons_by_annotator)} annotators on {tile.subframe_id}, expected at most {cfg.annotator_count}"
        )


def _supporters(tile, polygons_by_annotator, cfg) -> dict:
    out = {}
    for annotator in sorted(polygons_by_annotator):
        best = None
        for poly in polygons_by_annotator[annotator]:
            area = _overlap_area(poly, tile, cfg)
            if area > 0.0 and (best is None or area > best[1] or (area == best[1] and _rank(poly.context) < _rank(best[0]))):
                best = (poly.context, area)
        if best is not None:
            out[annotator] = best
    return out


def _rank(context: GeologicContext) -> int:
    return CONTEXT_PRIORITY.index(context)


def plurality_context(contexts: Iterable[GeologicContext]) -> tuple[GeologicContext, bool]:
    """Most common context and whether the priority tie-break decided it."""
    counts = Counter(GeologicContext(c) for c in contexts)
    if not counts:
        raise LabelError("no context votes")
    top = max(counts.values())
    leaders = sorted((c for c, n in counts.items() if n == top), key=_rank)
    return leaders[0], len(leaders) > 1


def vote_tile(
    tile: TileGeometry,
    polygons_by_annotator: Mapping[str, Sequence[AnnotationPolygon]],
    cfg: VoteConfig = VoteConfig(),
    season: SeasonTag = SeasonTag.WINTER_CANDIDATE,
) -> TileVote:
    """Label, supporting annotators and context for one tile."""
    _check_sets(tile, polygons_by_annotator, cfg)
    if SeasonTag(season) == SeasonTag.SUMMER_NEGATIVE:
        return TileVote(TileLabel.BACKGROUND)
    supporters = _supporters(tile, polygons_by_annotator, cfg)
    k = len(supporters)
    if k >= cfg.majority_threshold:
        context, tie = plurality_context(ctx for ctx, _ in supporters.values())
        return TileVote(TileLabel.FROST, supporters, context, tie)
    if k > 0 or cfg.zero_overlap == ZeroOverlapPolicy.EXCLUDE:
        return TileVote(TileLabel.EXCLUDED_AMBIGUOUS, supporters)
    return TileVote(TileLabel.BACKGROUND)


def aggregate_tile_label(
    tile: TileGeometry,
    polygons_by_annotator: Mapping[str, Sequence[AnnotationPolygon]],
    cfg: VoteConfig = VoteConfig(),
    season: SeasonTag = SeasonTag.WINTER_CANDIDATE,
) -> TileLabel:
    return vote_tile(tile, polygons_by_annotator, cfg, season).label


def aggregate_tile_context(
    tile: TileGeometry,
    polygons_by_annotator: Mapping[str, Sequence[AnnotationPolygon]],
    cfg: VoteConfig = VoteConfig(),
) -> GeologicContext:
    """Plurality context over the annotators whose polygons overlap ``tile``.

    Raises LabelError when the tile does not carry a frost majority.
    """
    vote = vote_tile(tile, polygons_by_annotator, cfg)
    if vote.label != TileLabel.FROST:
        raise LabelError(f"tile {tile.id} is {vote.label.value}, context is only defined for frost tiles")
    return vote.context


def parse_annotation(record: Mapping) -> AnnotationPolygon:
    try:
        return AnnotationPolygon(
            subframe_id=str(record["subframe_id"]),
            annotator_id=str(record["annotator_id"]),
            vertices=tuple(tuple(v) for v in record["vertices"]),
            context=record["context"],
            indicators=tuple(record.get("indicators", ())),
        )
    except KeyError as exc:
        raise LabelError(f"annotation missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, LabelError):
            raise
        raise LabelError(f"malformed annotation: {exc}") from exc


def load_annotations(path) -> list[AnnotationPolygon]:
    """Read a JSON Lines annotation export, one polygon per line."""
    out = []
    with open(Path(path)) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(parse_annotation(json.loads(line)))
            except (json.JSONDecodeError, LabelError) as exc:
                raise LabelError(f"{path}:{lineno}: {exc}") from exc
    return out


def group_by_subframe(polygons: Iterable[AnnotationPolygon]) -> dict[str, dict[str, list[AnnotationPolygon]]]:
    grouped: dict[str, dict[str, list]] = defaultdict(lambda: defaultdict(list))
    for poly in polygons:
        grouped[poly.subframe_id][poly.annotator_id].append(poly)
    return {sf: dict(by_ann) for sf, by_ann in grouped.items()}
