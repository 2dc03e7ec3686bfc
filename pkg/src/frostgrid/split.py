"""Spatial train/validation/test folds at HEALPix-pixel granularity.

Every tile inherits the fold of the pixel holding its observation's site
center, so no pixel (and hence no repeatedly imaged site) ever spans two
folds.

Pixels are packed greedily: largest first, each into the fold whose tile
count is furthest below its target. With ``T`` total tiles and ``c`` the
largest pixel's tile count, every fold ends within ``c`` tiles of its
target, i.e. achieved fractions deviate by at most ``c / T``.
"""

import hashlib
from collections import Counter, defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import healpix
from .healpix import Scheme


class SplitError(ValueError):
    pass


class Fold(str, Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


FOLDS = (Fold.TRAIN, Fold.VAL, Fold.TEST)


@dataclass(frozen=True)
class FoldSpec:
    ratios: tuple[float, float, float] = (0.70, 0.10, 0.20)
    nside: int = 8
    scheme: Scheme = Scheme.RING
    # None keeps equal-count pixels in pixel-id order
    seed: int | None = None

    def __post_init__(self):
        ratios = tuple(float(r) for r in self.ratios)
        if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
            raise ValueError(f"fold ratios must be three non-negative numbers summing to 1, got {self.ratios}")
        object.__setattr__(self, "ratios", ratios)
        object.__setattr__(self, "nside", healpix.check_nside(self.nside))
        object.__setattr__(self, "scheme", Scheme(self.scheme))

    def target(self, fold: Fold) -> float:
        return self.ratios[FOLDS.index(Fold(fold))]


@dataclass
class FoldAssignment:
    spec: FoldSpec
    pixel_folds: dict[int, Fold]
    pixel_counts: dict[int, int]

    def fold_of(self, pixel: int) -> Fold:
        return self.pixel_folds[pixel]

    @property
    def total(self) -> int:
        return sum(self.pixel_counts.values())

    def tile_counts(self) -> dict[Fold, int]:
        counts = {f: 0 for f in FOLDS}
        for pixel, fold in self.pixel_folds.items():
            counts[fold] += self.pixel_counts[pixel]
        return counts

    def achieved(self) -> dict[Fold, float]:
        total = self.total
        return {f: n / total for f, n in self.tile_counts().items()}

    def deviation(self) -> dict[Fold, float]:
        return {f: a - self.spec.target(f) for f, a in self.achieved().items()}

    def deviation_bound(self) -> float:
        return max(self.pixel_counts.values()) / self.total

    def pixels_in(self, fold: Fold) -> list[int]:
        return sorted(p for p, f in self.pixel_folds.items() if f == fold)

    def to_dict(self) -> dict:
        counts = self.tile_counts()
        achieved = self.achieved()
        return {
            "nside": self.spec.nside,
            "scheme": self.spec.scheme.value,
            "seed": self.spec.seed,
            "targets": {f.value: self.spec.target(f) for f in FOLDS},
            "tile_counts": {f.value: counts[f] for f in FOLDS},
            "achieved": {f.value: achieved[f] for f in FOLDS},
            "deviation_bound": self.deviation_bound(),
            "pixels": {str(p): self.pixel_folds[p].value for p in sorted(self.pixel_folds)},
        }


def record_pixel(record, nside: int, scheme=Scheme.RING) -> int:
    return healpix.latlon_to_pixel(nside, record.center_lat, record.center_lon, scheme)


def record_pixels(records: Sequence, nside: int, scheme=Scheme.RING) -> list[int]:
    """Vectorized :func:`record_pixel` over many records."""
    if not records:
        return []
    lat = np.array([r.center_lat for r in records], dtype=np.float64)
    lon = np.array([r.center_lon for r in records], dtype=np.float64)
    return [int(p) for p in np.atleast_1d(healpix.latlon_to_pixel(nside, lat, lon, scheme))]


def _tie_key(pixel: int, seed: int | None) -> tuple:
    if seed is None:
        return (pixel,)
    digest = hashlib.blake2b(f"{seed}:{pixel}".encode(), digest_size=8).digest()
    return (int.from_bytes(digest, "big"), pixel)


def greedy_pack(pixel_counts: dict[int, int], spec: FoldSpec) -> dict[int, Fold]:
    """Largest-first deficit filling of pixels into folds."""
    total = sum(pixel_counts.values())
    deficit = [r * total for r in spec.ratios]
    order = sorted(pixel_counts, key=lambda p: (-pixel_counts[p], *_tie_key(p, spec.seed)))
    out = {}
    for pixel in order:
        # first fold wins ties, so a zero-ratio fold is only used when forced
        best = max(range(len(FOLDS)), key=lambda i: (deficit[i], -i))
        deficit[best] -= pixel_counts[pixel]
        out[pixel] = FOLDS[best]
    return out


def assign_folds(records: Sequence, spec: FoldSpec = FoldSpec()) -> FoldAssignment:
    """Group records by the pixel of their site center and pack pixels into folds.

    Records need ``center_lat`` and ``center_lon`` attributes (degrees).
    """
    if not records:
        raise SplitError("no records to split")
    counts = Counter(record_pixels(records, spec.nside, spec.scheme))
    needed = sum(1 for r in spec.ratios if r > 0)
    if len(counts) < needed:
        raise SplitError(
            f"{len(counts)} distinct pixel(s) at nside={spec.nside} cannot fill {needed} folds without leakage"
        )
    pixel_counts = dict(sorted(counts.items()))
    return FoldAssignment(spec, greedy_pack(pixel_counts, spec), pixel_counts)


@dataclass
class AuditReport:
    passed: bool
    violations: list[dict] = field(default_factory=list)
    checked_records: int = 0
    pixels_per_fold: dict[str, list[int]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "status": "PASS" if self.passed else "FAIL",
            "checked_records": self.checked_records,
            "violation_count": len(self.violations),
            "violations": self.violations,
            "pixels_per_fold": self.pixels_per_fold,
        }


def leakage_audit(records: Iterable, assignment: FoldAssignment) -> AuditReport:
    """Check that fold pixel sets are disjoint and every record sits in its pixel's fold.

    Records need ``tile_id``, ``center_lat``, ``center_lon`` and ``fold``.
    """
    spec = assignment.spec
    per_pixel: dict[int, Counter] = defaultdict(Counter)
    mismatched: dict[int, list[str]] = defaultdict(list)
    n = 0
    records = list(records)
    for rec, pixel in zip(records, record_pixels(records, spec.nside, spec.scheme)):
        n += 1
        fold = Fold(rec.fold).value if rec.fold else ""
        per_pixel[pixel][fold] += 1
        expected = assignment.pixel_folds.get(pixel)
        if expected is None or expected.value != fold:
            mismatched[pixel].append(rec.tile_id)

    violations = []
    for pixel in sorted(per_pixel):
        folds = per_pixel[pixel]
        if len(folds) > 1 or mismatched.get(pixel):
            expected = assignment.pixel_folds.get(pixel)
            violations.append(
                {
                    "pixel": pixel,
                    "assigned_fold": expected.value if expected else None,
                    "fold_counts": dict(sorted(folds.items())),
                    "mismatched_tiles": sorted(mismatched.get(pixel, [])),
                }
            )
    seen_folds = defaultdict(set)
    for pixel, folds in per_pixel.items():
        for fold in folds:
            seen_folds[fold].add(pixel)
    return AuditReport(
        passed=not violations,
        violations=violations,
        checked_records=n,
        pixels_per_fold={f: sorted(p) for f, p in sorted(seen_folds.items())},
    )
