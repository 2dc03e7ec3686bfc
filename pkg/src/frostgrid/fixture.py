"""Deterministic synthetic fixture for end-to-end runs and tests.

Seven sites at the northern mid-latitude frost-site coordinates each get one
winter and one summer observation at reduced scale (64-px subframes, 8-px
tiles). Frost tiles are planned so that, after the HEALPix split, the train
fold's frost contexts come out 83.1 / 10.0 / 2.6 / 4.3 % (other, crater
rim/wall, gullies, dunes) and the test fold holds only "other" and dunes
(98.3 / 1.7 %). Dune tiles are bright at some train sites and dark at
others, and uniformly dark in test.

Every winter observation also carries tiles that the pipeline must drop:
ambiguous single-annotator tiles, frost tiles with too many black pixels,
and (site A) one subframe that is mostly no-data.
"""

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist

import numpy as np

from .config import PipelineConfig
from .evaluate import write_predictions
from .healpix import latlon_to_pixel
from .raster import write_pgm
from .split import Fold, greedy_pack

SITES = {
    "A": (64.550, 315.907),
    "B": (58.236, 89.607),
    "C": (63.738, 11.035),
    "D": (42.572, 67.332),
    "E": (56.847, 350.401),
    "F": (59.839, 135.999),
    "G": (64.829, 209.406),
}

# winter / summer subframe columns per site (each subframe is 64 x 64 px)
LAYOUT = {"A": (3, 1), "B": (2, 1), "C": (2, 1), "D": (1, 1), "E": (2, 1), "F": (1, 1), "G": (1, 1)}

SUBFRAME = 64
TILE = 8
ANNOTATORS = ("ann1", "ann2", "ann3")
AMBIGUOUS_PER_WINTER = 2
BLACK_PER_WINTER = 1

TRAIN_CONTEXTS = {"other": 192, "crater_rim_wall": 23, "gullies": 6, "dunes": 10}
TEST_CONTEXTS = {"other": 57, "dunes": 1}
VAL_CONTEXTS = {"other": 20, "dunes": 2}

INDICATORS = {
    "other": ["uniform_albedo"],
    "crater_rim_wall": ["uniform_albedo", "halos"],
    "gullies": ["polygonal_features"],
    "dunes": ["defrosting_marks"],
}


def fixture_config() -> PipelineConfig:
    return PipelineConfig(subframe_size=SUBFRAME, tile_size=TILE)


@dataclass
class SitePlan:
    site: str
    winter_tiles: int
    summer_tiles: int
    frost: list = field(default_factory=list)

    @property
    def kept(self) -> int:
        dropped = AMBIGUOUS_PER_WINTER + BLACK_PER_WINTER
        return self.winter_tiles + self.summer_tiles - dropped


def _site_plans() -> dict[str, SitePlan]:
    per_sf = (SUBFRAME // TILE) ** 2
    plans = {}
    for site, (w, s) in LAYOUT.items():
        # site B's summer strip has a 16-px partial edge subframe: 2 tile columns
        extra = (SUBFRAME // TILE) * 2 if site == "B" else 0
        plans[site] = SitePlan(site, w * per_sf, s * per_sf + extra)
    return plans


def plan_folds(cfg: PipelineConfig | None = None) -> dict[str, Fold]:
    cfg = cfg or fixture_config()
    plans = _site_plans()
    counts = Counter()
    pixel_of = {}
    for site, (lat, lon) in SITES.items():
        pixel_of[site] = latlon_to_pixel(cfg.folds.nside, lat, lon, cfg.folds.scheme)
        counts[pixel_of[site]] += plans[site].kept
    folds = greedy_pack(dict(sorted(counts.items())), cfg.folds)
    return {site: folds[pixel_of[site]] for site in SITES}


def _distribute(plans, sites, contexts: dict, rng) -> None:
    sequence = [ctx for ctx, n in contexts.items() for _ in range(n)]
    capacity = {s: plans[s].winter_tiles - AMBIGUOUS_PER_WINTER - BLACK_PER_WINTER - 4 for s in sites}
    if sum(capacity.values()) < len(sequence):
        raise RuntimeError("fixture layout too small for the planned frost tiles")
    i = 0
    for ctx in sequence:
        while len(plans[sites[i % len(sites)]].frost) >= capacity[sites[i % len(sites)]]:
            i += 1
        plans[sites[i % len(sites)]].frost.append(ctx)
        i += 1
    for s in sites:
        rng.shuffle(plans[s].frost)


def _tile_values(rng, mean, sd):
    # evenly spaced normal quantiles keep single-tile histograms smooth
    dist = NormalDist(mean, sd)
    n = TILE * TILE
    vals = np.array([dist.inv_cdf((k + 0.5) / n) for k in range(n)])
    rng.shuffle(vals)
    return np.clip(np.rint(vals), 1, 255).astype(np.uint8).reshape(TILE, TILE)


def build_fixture(out_dir, seed: int = 20220531) -> dict:
    """Write observations, annotations, predictions and config under ``out_dir``.

    Returns the design summary (expected counts per fold and context).
    """
    out = Path(out_dir)
    obs_dir = out / "observations"
    obs_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    cfg = fixture_config()
    plans = _site_plans()
    site_folds = plan_folds(cfg)
    by_fold = {f: [s for s in SITES if site_folds[s] == f] for f in Fold}
    for fold, contexts in ((Fold.TRAIN, TRAIN_CONTEXTS), (Fold.TEST, TEST_CONTEXTS), (Fold.VAL, VAL_CONTEXTS)):
        if not by_fold[fold]:
            raise RuntimeError(f"fixture split left fold {fold.value} without sites")
        _distribute(plans, by_fold[fold], contexts, rng)

    train_sites = by_fold[Fold.TRAIN]
    annotations = []
    predictions = {}
    expected = {f.value: Counter() for f in Fold}

    for site, (lat, lon) in SITES.items():
        plan = plans[site]
        fold = site_folds[site]
        bright_dunes = fold == Fold.TRAIN and train_sites.index(site) % 2 == 0
        for season, n_sf in (("winter_candidate", LAYOUT[site][0]), ("summer_negative", LAYOUT[site][1])):
            obs_id = f"SITE{site}_{'W' if season == 'winter_candidate' else 'S'}"
            width = n_sf * SUBFRAME + (16 if site == "B" and season == "summer_negative" else 0)
            extra_invalid = site == "A" and season == "winter_candidate"
            if extra_invalid:
                width += SUBFRAME
            pixels = np.zeros((SUBFRAME, width), dtype=np.uint8)
            roles = []
            if season == "winter_candidate":
                roles = list(plan.frost) + ["ambiguous"] * AMBIGUOUS_PER_WINTER + ["black"] * BLACK_PER_WINTER
            tile_slots = [
                (r, c) for gc in range(n_sf) for r in range(SUBFRAME // TILE) for c in range(gc * 8, gc * 8 + 8)
            ]
            if site == "B" and season == "summer_negative":
                tile_slots += [(r, c) for r in range(SUBFRAME // TILE) for c in range(n_sf * 8, n_sf * 8 + 2)]
            role_of = dict(zip(tile_slots, roles + ["background"] * (len(tile_slots) - len(roles))))
            tri_vote_crater = 0
            for (r, c), role in role_of.items():
                r0, c0 = r * TILE, c * TILE
                if role in ("background",):
                    vals = _tile_values(rng, 90, 12)
                elif role == "ambiguous":
                    vals = _tile_values(rng, 140, 15)
                elif role == "black":
                    vals = _tile_values(rng, 180, 15)
                    vals[:2, :] = 0
                elif role == "dunes":
                    if fold == Fold.TRAIN:
                        vals = _tile_values(rng, 205 if bright_dunes else 55, 8)
                    else:
                        vals = _tile_values(rng, 70, 8)
                else:
                    vals = _tile_values(rng, {"other": 180, "crater_rim_wall": 160, "gullies": 150}[role], 15)
                pixels[r0 : r0 + TILE, c0 : c0 + TILE] = vals

                gc = c // 8
                sf_id = f"{obs_id}_sf000_{gc:03d}"
                lr0, lc0 = r0, c0 - gc * SUBFRAME
                tile_id = f"{sf_id}_t{r:03d}_{(c - gc * 8):03d}"
                box = [[lr0 + 1, lc0 + 1], [lr0 + 1, lc0 + 7], [lr0 + 7, lc0 + 7], [lr0 + 7, lc0 + 1]]
                if role in TRAIN_CONTEXTS:
                    voters = [(a, role) for a in ANNOTATORS]
                    if role == "crater_rim_wall" and tri_vote_crater < 3:
                        # two annotators split crater vs other: priority resolves to crater
                        voters = [("ann1", "crater_rim_wall"), ("ann3", "other")]
                        tri_vote_crater += 1
                    for ann, ctx in voters:
                        annotations.append(
                            {"subframe_id": sf_id, "annotator_id": ann, "vertices": box, "context": ctx, "indicators": INDICATORS[ctx]}
                        )
                    expected[fold.value][role] += 1
                    predictions[tile_id] = _score(rng, role, fold)
                elif role in ("ambiguous", "black"):
                    voters = ANNOTATORS[:1] if role == "ambiguous" else ANNOTATORS
                    for ann in voters:
                        annotations.append(
                            {"subframe_id": sf_id, "annotator_id": ann, "vertices": box, "context": "other", "indicators": ["halos"]}
                        )
                else:
                    expected[fold.value]["background"] += 1
                    predictions[tile_id] = _score(rng, "background", fold)
            if extra_invalid:
                c0 = n_sf * SUBFRAME
                pixels[: SUBFRAME // 5, c0:] = _fill(rng, SUBFRAME // 5, SUBFRAME)
            write_pgm(obs_dir / f"{obs_id}.pgm", pixels)
            sidecar = {"id": obs_id, "site_id": site, "center_lat": lat, "center_lon": lon, "season_tag": season}
            (obs_dir / f"{obs_id}.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")

    with open(out / "annotations.jsonl", "w") as fh:
        for rec in sorted(annotations, key=lambda a: (a["subframe_id"], a["annotator_id"], a["vertices"])):
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    write_predictions(out / "predictions.csv", predictions)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    design = {
        "site_folds": {s: f.value for s, f in site_folds.items()},
        "expected": {f: dict(sorted(c.items())) for f, c in expected.items()},
    }
    (out / "design.json").write_text(json.dumps(design, indent=2, sort_keys=True) + "\n")
    return design


def _fill(rng, rows, cols):
    return np.clip(np.rint(rng.normal(100, 10, (rows, cols))), 1, 255).astype(np.uint8)


def _score(rng, role, fold) -> float:
    if role == "background":
        lo, hi = (0.0, 0.45) if rng.random() > 0.05 else (0.5, 0.8)
    elif role == "dunes":
        lo, hi = (0.35, 0.95) if fold == Fold.TRAIN else (0.2, 0.45)
    else:
        lo, hi = {"other": (0.6, 1.0), "crater_rim_wall": (0.5, 1.0), "gullies": (0.3, 0.9)}[role]
    return round(float(rng.uniform(lo, hi)), 4)
