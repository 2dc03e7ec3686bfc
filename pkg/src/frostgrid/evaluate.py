"""Accuracy, per-context recall curves, context tables and intensity shift.

A tile is predicted frost when ``score >= threshold``. Recall curves keep
integer hit counts so that aggregate identities can be checked exactly.
"""

import csv
from collections import Counter
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from pathlib import Path

import numpy as np

from .labels import CONTEXT_PRIORITY, GeologicContext, TileLabel

ALL_CONTEXTS = "all"
N_BINS = 256


class PredictionError(ValueError):
    pass


@dataclass(frozen=True)
class PredictionRecord:
    tile_id: str
    score: float

    def __post_init__(self):
        score = float(self.score)
        if not np.isfinite(score) or not 0.0 <= score <= 1.0:
            raise PredictionError(f"{self.tile_id}: score {self.score!r} not a finite value in [0, 1]")
        object.__setattr__(self, "score", score)


def default_thresholds(n: int = 101) -> tuple[float, ...]:
    return tuple(float(t) for t in np.linspace(0.0, 1.0, n))


def read_predictions(path) -> dict[str, float]:
    """Read a ``tile_id,score`` CSV; duplicated tile ids are an error."""
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"tile_id", "score"} <= set(reader.fieldnames):
            raise PredictionError(f"{path}: expected header 'tile_id,score'")
        try:
            records = [PredictionRecord(row["tile_id"], row["score"]) for row in reader]
        except (TypeError, ValueError) as exc:
            if isinstance(exc, PredictionError):
                raise
            raise PredictionError(f"{path}: {exc}") from exc
    return index_predictions(records)


def write_predictions(path, predictions: Mapping[str, float]) -> None:
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["tile_id", "score"])
        for tile_id in sorted(predictions):
            writer.writerow([tile_id, repr(float(predictions[tile_id]))])


def index_predictions(predictions) -> dict[str, float]:
    if isinstance(predictions, Mapping):
        return {k: PredictionRecord(k, v).score for k, v in predictions.items()}
    out = {}
    dupes = []
    for rec in predictions:
        if not isinstance(rec, PredictionRecord):
            rec = PredictionRecord(*rec)
        if rec.tile_id in out:
            dupes.append(rec.tile_id)
        out[rec.tile_id] = rec.score
    if dupes:
        raise PredictionError(f"duplicate predictions for tiles: {', '.join(sorted(set(dupes)))}")
    return out


def _fold_scores(predictions, manifest: Iterable, fold) -> list[tuple]:
    """``(record, score)`` pairs for every manifest tile in ``fold``."""
    scores = index_predictions(predictions)
    fold = getattr(fold, "value", fold)
    rows = [r for r in manifest if getattr(r.fold, "value", r.fold) == fold]
    missing = sorted(r.tile_id for r in rows if r.tile_id not in scores)
    if missing:
        shown = ", ".join(missing[:20]) + (" ..." if len(missing) > 20 else "")
        raise PredictionError(f"{len(missing)} tile(s) in fold {fold} lack predictions: {shown}")
    return [(r, scores[r.tile_id]) for r in rows]


def _is_frost(record) -> bool:
    return TileLabel(record.label) == TileLabel.FROST


def confusion_matrix(predictions, manifest, fold, threshold: float = 0.5) -> dict[str, int]:
    cm = {"tp": 0, "fp": 0, "tn": 0, "fn": 0}
    for rec, score in _fold_scores(predictions, manifest, fold):
        positive = score >= threshold
        if _is_frost(rec):
            cm["tp" if positive else "fn"] += 1
        else:
            cm["fp" if positive else "tn"] += 1
    return cm


def accuracy(predictions, manifest, fold, threshold: float = 0.5) -> float:
    """Share of tiles whose thresholded score matches the frost label."""
    pairs = _fold_scores(predictions, manifest, fold)
    if not pairs:
        raise PredictionError(f"fold {getattr(fold, 'value', fold)} has no tiles")
    correct = sum((score >= threshold) == _is_frost(rec) for rec, score in pairs)
    return correct / len(pairs)


def _count_at_or_above(scores: Sequence[float], thresholds: Sequence[float]) -> list[int]:
    ordered = np.sort(np.asarray(scores, dtype=np.float64))
    below = np.searchsorted(ordered, np.asarray(thresholds, dtype=np.float64), side="left")
    return [int(len(ordered) - b) for b in below]


@dataclass(frozen=True)
class RecallCurve:
    context: str
    thresholds: tuple[float, ...]
    hits: tuple[int, ...]
    support: int

    @property
    def represented(self) -> bool:
        return self.support > 0

    @property
    def recall(self) -> tuple[float, ...] | None:
        if not self.support:
            return None
        return tuple(h / self.support for h in self.hits)

    def exact_recall(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(h, self.support) for h in self.hits)

    def to_dict(self) -> dict:
        out = {"context": self.context, "support": self.support, "represented": self.represented}
        if self.represented:
            out["thresholds"] = list(self.thresholds)
            out["recall"] = list(self.recall)
        else:
            out["note"] = "not represented"
        return out


def _check_grid(thresholds) -> tuple[float, ...]:
    grid = tuple(float(t) for t in thresholds)
    if not grid or any(not 0.0 <= t <= 1.0 for t in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("threshold grid must be strictly ascending within [0, 1]")
    return grid


def recall_by_context(predictions, manifest, fold, thresholds=None) -> list[RecallCurve]:
    """Recall-vs-threshold curves for all frost tiles and for each context.

    Contexts without frost tiles in the fold come back with ``support == 0``.
    """
    grid = _check_grid(thresholds if thresholds is not None else default_thresholds())
    frost = [(rec, s) for rec, s in _fold_scores(predictions, manifest, fold) if _is_frost(rec)]
    if not frost:
        raise PredictionError(f"fold {getattr(fold, 'value', fold)} has no frost tiles")
    curves = [RecallCurve(ALL_CONTEXTS, grid, tuple(_count_at_or_above([s for _, s in frost], grid)), len(frost))]
    for ctx in CONTEXT_PRIORITY:
        scores = [s for rec, s in frost if rec.context and GeologicContext(rec.context) == ctx]
        curves.append(RecallCurve(ctx.value, grid, tuple(_count_at_or_above(scores, grid)), len(scores)))
    return curves


def accuracy_curve(predictions, manifest, fold, thresholds) -> list[Fraction]:
    """Accuracy at each threshold from cumulative score counts."""
    grid = _check_grid(thresholds)
    pairs = _fold_scores(predictions, manifest, fold)
    frost = [s for rec, s in pairs if _is_frost(rec)]
    background = [s for rec, s in pairs if not _is_frost(rec)]
    tp = _count_at_or_above(frost, grid)
    fp = _count_at_or_above(background, grid)
    return [Fraction(t + len(background) - f, len(pairs)) for t, f in zip(tp, fp)]


def _round_pct(value: Fraction, decimals: int) -> float:
    q = Decimal(1).scaleb(-decimals)
    exact = Decimal(value.numerator) / Decimal(value.denominator)
    return float(exact.quantize(q, rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class ContextDistribution:
    fold: str
    counts: dict[str, int]
    decimals: int = 1

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def percentages(self) -> dict[str, float]:
        """Percentage of frost tiles per context, rounded half-up to ``decimals``."""
        if not self.total:
            return {c: 0.0 for c in self.counts}
        return {c: _round_pct(Fraction(100 * n, self.total), self.decimals) for c, n in self.counts.items()}

    @property
    def absent(self) -> list[str]:
        return [c for c, n in self.counts.items() if n == 0]

    def to_dict(self) -> dict:
        out = {
            "fold": self.fold,
            "frost_tiles": self.total,
            "counts": dict(self.counts),
            "percentages": self.percentages,
            "absent": self.absent,
            "rounding": f"half-up to {self.decimals} decimal(s)",
        }
        if not self.total:
            out["notice"] = "no frost tiles in fold"
        return out


def context_distribution(manifest: Iterable, fold, decimals: int = 1) -> ContextDistribution:
    fold = getattr(fold, "value", fold)
    counts = Counter(
        GeologicContext(r.context).value
        for r in manifest
        if getattr(r.fold, "value", r.fold) == fold and _is_frost(r)
    )
    return ContextDistribution(fold, {c.value: counts.get(c.value, 0) for c in CONTEXT_PRIORITY}, decimals)


CONTEXT_TITLES = {
    "other": "Other",
    "crater_rim_wall": "Crater Rim/Wall",
    "gullies": "Gully",
    "dunes": "Dune",
}
TABLE_ORDER = ("other", "crater_rim_wall", "gullies", "dunes")


def format_context_table(distributions: Sequence[ContextDistribution]) -> str:
    """Plain-text table, one row per fold, ``---`` for absent contexts."""
    header = ["Context"] + [CONTEXT_TITLES[c] for c in TABLE_ORDER]
    rows = [header]
    for dist in distributions:
        pct = dist.percentages
        row = [dist.fold.capitalize()]
        for c in TABLE_ORDER:
            row.append("---" if dist.counts[c] == 0 else f"{pct[c]:.{dist.decimals}f}%")
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = [" | ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in rows]
    lines.insert(1, "-+-".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


@dataclass
class IntensityHistogram:
    counts: np.ndarray
    scope: dict = field(default_factory=dict)

    @property
    def pixel_count(self) -> int:
        return int(self.counts.sum())

    @property
    def frequencies(self) -> np.ndarray:
        total = self.pixel_count
        if not total:
            raise PredictionError(f"empty histogram for {self.scope}")
        return self.counts / total

    def to_dict(self) -> dict:
        return {"scope": self.scope, "pixel_count": self.pixel_count, "frequencies": self.frequencies.tolist()}


def intensity_histogram(pixel_arrays: Iterable[np.ndarray], include_invalid: bool = False, scope=None) -> IntensityHistogram:
    counts = np.zeros(N_BINS, dtype=np.int64)
    for arr in pixel_arrays:
        counts += np.bincount(np.asarray(arr, dtype=np.uint8).ravel(), minlength=N_BINS)
    if not include_invalid:
        counts[0] = 0
    return IntensityHistogram(counts, dict(scope or {}))


def histogram_intersection(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.minimum(p, q).sum())


def wasserstein_1d(p: np.ndarray, q: np.ndarray) -> float:
    """Earth mover's distance between two histograms on unit-width bins."""
    return float(np.abs(np.cumsum(p) - np.cumsum(q)).sum())


def _prominence(vals: np.ndarray, i: int) -> float:
    # height above the higher of the two lowest points reached before climbing past vals[i]
    left_min = right_min = vals[i]
    j = i - 1
    while j >= 0 and vals[j] <= vals[i]:
        left_min = min(left_min, vals[j])
        j -= 1
    j = i + 1
    while j < len(vals) and vals[j] <= vals[i]:
        right_min = min(right_min, vals[j])
        j += 1
    return float(vals[i] - max(left_min, right_min))


def modality(freqs: np.ndarray, window: int = 5, min_prominence: float = 0.2) -> int:
    """Number of modes of the moving-average-smoothed histogram.

    A local maximum counts when its prominence is at least
    ``min_prominence`` times the tallest bin; plateaus count once.
    """
    smooth = np.convolve(np.asarray(freqs, dtype=np.float64), np.ones(window) / window, mode="same")
    keep = np.concatenate(([True], smooth[1:] != smooth[:-1]))
    vals = smooth[keep]
    if not vals.size or vals.max() <= 0:
        return 0
    # edges count as zero-frequency bins
    vals = np.concatenate(([0.0], vals, [0.0]))
    floor = min_prominence * vals.max()
    peaks = [i for i in range(1, len(vals) - 1) if vals[i] > vals[i - 1] and vals[i] > vals[i + 1]]
    return sum(1 for i in peaks if _prominence(vals, i) >= floor)


@dataclass
class ShiftReport:
    hist_a: IntensityHistogram
    hist_b: IntensityHistogram
    intersection: float
    wasserstein: float
    modes_a: int
    modes_b: int

    def to_dict(self) -> dict:
        return {
            "a": self.hist_a.to_dict(),
            "b": self.hist_b.to_dict(),
            "histogram_intersection": self.intersection,
            "wasserstein_1": self.wasserstein,
            "modes_a": self.modes_a,
            "modes_b": self.modes_b,
        }


def exact_shift_metrics(counts_a, counts_b) -> tuple[Fraction, Fraction]:
    """Histogram intersection and W1 as exact fractions of integer bin counts."""
    a = [int(c) for c in counts_a]
    b = [int(c) for c in counts_b]
    na, nb = sum(a), sum(b)
    if not na or not nb:
        raise PredictionError("empty histogram")
    inter = sum(min(x * nb, y * na) for x, y in zip(a, b))
    transport = 0
    cum_a = cum_b = 0
    for x, y in zip(a, b):
        cum_a += x
        cum_b += y
        transport += abs(cum_a * nb - cum_b * na)
    return Fraction(inter, na * nb), Fraction(transport, na * nb)


def shift_between(hist_a: IntensityHistogram, hist_b: IntensityHistogram) -> ShiftReport:
    inter, transport = exact_shift_metrics(hist_a.counts, hist_b.counts)
    return ShiftReport(
        hist_a,
        hist_b,
        float(inter),
        float(transport),
        modality(hist_a.frequencies),
        modality(hist_b.frequencies),
    )


def intensity_shift(
    manifest: Iterable,
    pixel_source: Callable,
    fold_a,
    fold_b,
    context=None,
    include_invalid: bool = False,
) -> ShiftReport:
    """Compare pixel-intensity histograms of two folds.

    ``pixel_source(record)`` returns the tile's 2-D pixel array. With
    ``context`` set only frost tiles of that context are used.
    """
    rows = list(manifest)

    def scoped(fold):
        fold = getattr(fold, "value", fold)
        picked = [r for r in rows if getattr(r.fold, "value", r.fold) == fold]
        if context is not None:
            ctx = GeologicContext(context)
            picked = [r for r in picked if _is_frost(r) and r.context and GeologicContext(r.context) == ctx]
        if not picked:
            raise PredictionError(f"no tiles in fold {fold}" + (f" with context {context}" if context else ""))
        scope = {"fold": fold, "context": GeologicContext(context).value if context else None, "tiles": len(picked)}
        return intensity_histogram((pixel_source(r) for r in picked), include_invalid, scope)

    return shift_between(scoped(fold_a), scoped(fold_b))
