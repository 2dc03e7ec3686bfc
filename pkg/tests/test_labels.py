import itertools
import json
import random

import numpy as np
import pytest

from frostgrid import geometry
from frostgrid.labels import (
    CONTEXT_PRIORITY,
    AnnotationPolygon,
    GeologicContext,
    LabelError,
    OverlapRule,
    TileLabel,
    VoteConfig,
    ZeroOverlapPolicy,
    aggregate_tile_context,
    aggregate_tile_label,
    group_by_subframe,
    intersection_area,
    load_annotations,
    plurality_context,
    polygon_overlaps_tile,
    vote_tile,
)
from frostgrid.raster import SeasonTag, TileGeometry
from oracles import exact_rect_overlap, points_in_polygon

TILE = TileGeometry("sf", 0, 0, 10, 0.0)
FAR = ((50, 50), (50, 60), (60, 60))


def poly(verts, ann="a1", ctx="other", sf="sf"):
    return AnnotationPolygon(sf, ann, tuple(verts), ctx, ("halos",))


def square(r0, c0, r1, c1):
    return ((r0, c0), (r0, c1), (r1, c1), (r1, c0))


# ---- geometry ------------------------------------------------------------


def test_area_and_orientation():
    assert geometry.polygon_area(square(0, 0, 2, 3)) == 6
    assert geometry.signed_area(square(0, 0, 1, 1)) == -geometry.signed_area(square(0, 0, 1, 1)[::-1])


def test_clip_contained_and_disjoint():
    assert geometry.rect_intersection_area(square(2, 2, 4, 5), 0, 0, 10, 10) == 6
    assert geometry.rect_intersection_area(square(20, 20, 30, 30), 0, 0, 10, 10) == 0
    assert geometry.rect_intersection_area(square(-5, -5, 15, 15), 0, 0, 10, 10) == 100


def test_simplicity():
    assert geometry.is_simple(square(0, 0, 1, 1))
    assert not geometry.is_simple(((0, 0), (1, 1), (0, 1), (1, 0)))  # bow-tie
    assert not geometry.is_simple(((0, 0), (2, 0), (1, 0)))  # folds back on itself
    assert not geometry.is_simple(((0, 0), (1, 0), (1, 0), (0, 1)))


@pytest.mark.parametrize("seed", range(40))
def test_clip_matches_exact_halfplane_oracle(seed):
    rnd = random.Random(seed)
    pts = [(rnd.uniform(-8, 18), rnd.uniform(-8, 18)) for _ in range(rnd.randint(3, 9))]
    hull = _hull(pts)
    if len(hull) < 3:
        return
    got = geometry.rect_intersection_area(hull, 0, 0, 10, 10)
    assert got == pytest.approx(float(exact_rect_overlap(hull, 0, 0, 10, 10)), rel=1e-9, abs=1e-9)


def test_clip_matches_monte_carlo_within_one_percent():
    rng = np.random.default_rng(7)
    samples = rng.uniform(0, 10, size=(1_000_000, 2))
    checked = 0
    for seed in range(60):
        rnd = random.Random(seed)
        hull = _hull([(rnd.uniform(-6, 16), rnd.uniform(-6, 16)) for _ in range(8)])
        area = geometry.rect_intersection_area(hull, 0, 0, 10, 10)
        if area < 20:  # small overlaps need more samples for a 1 % estimate
            continue
        mc = points_in_polygon(hull, samples).mean() * 100
        assert abs(area - mc) / area < 0.01
        checked += 1
        if checked == 12:
            break
    assert checked == 12


def _hull(points):
    pts = sorted(set(points))
    if len(pts) < 3:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


# ---- overlap -------------------------------------------------------------


def test_overlap_rules():
    assert polygon_overlaps_tile(poly(square(2, 2, 5, 5)), TILE)
    assert not polygon_overlaps_tile(poly(square(10, 10, 12, 12)), TILE)  # corner touch
    assert not polygon_overlaps_tile(poly(square(0, 10, 5, 12)), TILE)  # edge touch
    tri = poly(((0, 0), (10, 0), (0, 7.4)))
    assert intersection_area(tri, TILE) == pytest.approx(float(exact_rect_overlap(tri.vertices, 0, 0, 10, 10)))
    assert intersection_area(tri, TILE) == pytest.approx(37.0)
    assert polygon_overlaps_tile(tri, TILE, OverlapRule.ANY_INTERSECTION)
    assert not polygon_overlaps_tile(tri, TILE, OverlapRule.MIN_AREA_FRACTION, 0.5)
    assert polygon_overlaps_tile(tri, TILE, OverlapRule.MIN_AREA_FRACTION, 0.37)


def test_degenerate_polygon_warns(caplog):
    sliver = poly(((1, 1), (1, 5), (1 + 1e-12, 9)))
    with caplog.at_level("WARNING"):
        assert not polygon_overlaps_tile(sliver, TILE)
    assert "degenerate" in caplog.text


def test_polygon_validation():
    with pytest.raises(LabelError, match="self-intersecting"):
        poly(((0, 0), (4, 4), (0, 4), (4, 0)))
    with pytest.raises(LabelError, match="< 3"):
        poly(((0, 0), (1, 1)))
    with pytest.raises(LabelError, match="indicators"):
        AnnotationPolygon("sf", "a", square(0, 0, 1, 1), "other", ())
    with pytest.raises(ValueError):
        poly(square(0, 0, 1, 1), ctx="lava")


# ---- vote ----------------------------------------------------------------


def voters(k, ctx="other"):
    out = {}
    for i in range(3):
        verts = square(1, 1, 9, 9) if i < k else FAR
        out[f"a{i}"] = [poly(verts, f"a{i}", ctx)]
    return out


@pytest.mark.parametrize(
    "k, policy, expected",
    [
        (0, "background", TileLabel.BACKGROUND),
        (0, "exclude", TileLabel.EXCLUDED_AMBIGUOUS),
        (1, "background", TileLabel.EXCLUDED_AMBIGUOUS),
        (1, "exclude", TileLabel.EXCLUDED_AMBIGUOUS),
        (2, "background", TileLabel.FROST),
        (2, "exclude", TileLabel.FROST),
        (3, "background", TileLabel.FROST),
        (3, "exclude", TileLabel.FROST),
    ],
)
def test_vote_truth_table(k, policy, expected):
    cfg = VoteConfig(zero_overlap=policy)
    assert aggregate_tile_label(TILE, voters(k), cfg) == expected
    # summer tiles are negatives whatever the annotators drew
    assert aggregate_tile_label(TILE, voters(k), cfg, SeasonTag.SUMMER_NEGATIVE) == TileLabel.BACKGROUND


def test_threshold_config():
    assert aggregate_tile_label(TILE, voters(1), VoteConfig(majority_threshold=1)) == TileLabel.FROST
    assert aggregate_tile_label(TILE, voters(2), VoteConfig(majority_threshold=3)) == TileLabel.EXCLUDED_AMBIGUOUS
    with pytest.raises(ValueError):
        VoteConfig(annotator_count=3, majority_threshold=4)


def test_one_vote_per_annotator():
    many = {"a0": [poly(square(1, 1, 4, 4), "a0"), poly(square(5, 5, 9, 9), "a0")], "a1": [poly(FAR, "a1")]}
    assert aggregate_tile_label(TILE, many) == TileLabel.EXCLUDED_AMBIGUOUS


def test_context_priority_order():
    assert [c.value for c in CONTEXT_PRIORITY] == ["dunes", "gullies", "crater_rim_wall", "other"]


@pytest.mark.parametrize("a, b", list(itertools.combinations(CONTEXT_PRIORITY, 2)))
def test_context_tie_pairs(a, b):
    ctx, tie = plurality_context([b, a])
    assert (ctx, tie) == (a, True)
    sets = {"a0": [poly(square(1, 1, 9, 9), "a0", b)], "a1": [poly(square(1, 1, 9, 9), "a1", a)]}
    assert aggregate_tile_context(TILE, sets) == a


def test_three_way_tie_and_majority():
    assert plurality_context(["other", "gullies", "crater_rim_wall"]) == (GeologicContext.GULLIES, True)
    assert plurality_context(["other", "other", "dunes"]) == (GeologicContext.OTHER, False)


def test_largest_overlap_sets_annotator_context():
    sets = {
        "a0": [poly(square(0, 0, 2, 2), "a0", "dunes"), poly(square(0, 0, 9, 9), "a0", "gullies")],
        "a1": [poly(square(0, 0, 9, 9), "a1", "gullies")],
    }
    vote = vote_tile(TILE, sets)
    assert vote.context == GeologicContext.GULLIES and not vote.context_tie_broken
    assert vote.tally() == "gullies:2"


def test_context_needs_frost():
    with pytest.raises(LabelError, match="only defined for frost"):
        aggregate_tile_context(TILE, voters(1))


def test_set_validation():
    with pytest.raises(LabelError, match="exactly one set"):
        vote_tile(TILE, {"a0": [poly(FAR, "a1")]})
    with pytest.raises(LabelError, match="unknown subframe"):
        vote_tile(TILE, {"a0": [poly(FAR, "a0", sf="other_sf")]})
    with pytest.raises(LabelError, match="at most 3"):
        vote_tile(TILE, {f"a{i}": [poly(FAR, f"a{i}")] for i in range(4)})


@pytest.mark.parametrize("seed", range(30))
def test_monotone_and_permutation_invariant(seed):
    rnd = random.Random(seed)
    cfg = VoteConfig(annotator_count=4, majority_threshold=2)
    sets = {}
    for i in range(3):
        r0, c0 = rnd.uniform(-5, 12), rnd.uniform(-5, 12)
        ctx = rnd.choice(list(GeologicContext))
        sets[f"a{i}"] = [poly(square(r0, c0, r0 + rnd.uniform(1, 8), c0 + rnd.uniform(1, 8)), f"a{i}", ctx)]
    base = vote_tile(TILE, sets, cfg)
    for perm in itertools.permutations(sorted(sets)):
        v = vote_tile(TILE, {a: sets[a] for a in perm}, cfg)
        assert (v.label, v.context) == (base.label, base.context)
    extra = dict(sets, a9=[poly(square(2, 2, 8, 8), "a9", rnd.choice(list(GeologicContext)))])
    after = vote_tile(TILE, extra, cfg)
    if base.label == TileLabel.FROST:
        assert after.label == TileLabel.FROST


def test_load_annotations(tmp_path):
    recs = [
        {"subframe_id": "s1", "annotator_id": "x", "vertices": [[0, 0], [0, 4], [4, 4]], "context": "dunes", "indicators": ["defrosting_marks"]},
        {"subframe_id": "s2", "annotator_id": "y", "vertices": [[0, 0], [0, 4], [4, 4]], "context": "other", "indicators": ["halos"]},
    ]
    path = tmp_path / "a.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in recs) + "\n\n")
    polys = load_annotations(path)
    assert [p.context for p in polys] == [GeologicContext.DUNES, GeologicContext.OTHER]
    assert set(group_by_subframe(polys)) == {"s1", "s2"}
    path.write_text(json.dumps({**recs[0], "vertices": [[0, 0], [4, 4], [0, 4], [4, 0]]}) + "\n")
    with pytest.raises(LabelError, match=":1:"):
        load_annotations(path)
    path.write_text(json.dumps({k: v for k, v in recs[0].items() if k != "context"}) + "\n")
    with pytest.raises(LabelError, match="context"):
        load_annotations(path)


def test_zero_overlap_policy_enum():
    assert ZeroOverlapPolicy("exclude") == ZeroOverlapPolicy.EXCLUDE
