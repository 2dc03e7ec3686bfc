"""Pipeline configuration and its content hash."""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .healpix import Scheme
from .labels import OverlapRule, VoteConfig, ZeroOverlapPolicy
from .raster import MAX_BLACK_FRACTION, MAX_INVALID_FRACTION, SUBFRAME_SIZE, TILE_SIZE
from .split import FoldSpec

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    subframe_size: int = SUBFRAME_SIZE
    max_invalid: float = MAX_INVALID_FRACTION
    tile_size: int = TILE_SIZE
    max_black: float = MAX_BLACK_FRACTION
    black_rule_all_tiles: bool = False
    vote: VoteConfig = field(default_factory=VoteConfig)
    folds: FoldSpec = field(default_factory=FoldSpec)
    threshold_count: int = 101
    decision_threshold: float = 0.5
    histogram_include_invalid: bool = False

    def __post_init__(self):
        if self.subframe_size < 1 or self.tile_size < 1:
            raise ConfigError("subframe and tile sizes must be positive")
        if not 0.0 <= self.max_invalid <= 1.0 or not 0.0 <= self.max_black <= 1.0:
            raise ConfigError("max_invalid and max_black must lie in [0, 1]")
        if self.threshold_count < 2:
            raise ConfigError("threshold_count must be >= 2")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["vote"]["overlap_rule"] = self.vote.overlap_rule.value
        out["vote"]["zero_overlap"] = self.vote.zero_overlap.value
        out["folds"]["scheme"] = self.folds.scheme.value
        out["folds"]["ratios"] = list(self.folds.ratios)
        return out

    @property
    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            if "vote" in data:
                data["vote"] = VoteConfig(**data["vote"])
            if "folds" in data:
                folds = dict(data["folds"])
                if "ratios" in folds:
                    folds["ratios"] = tuple(folds["ratios"])
                data["folds"] = FoldSpec(**folds)
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    def with_overrides(self, **overrides) -> "PipelineConfig":
        """Apply flat CLI overrides; ``None`` values are ignored."""
        top, vote, folds = {}, {}, {}
        for key, value in overrides.items():
            if value is None:
                continue
            if key in ("annotator_count", "majority_threshold", "min_area_fraction"):
                vote[key] = value
            elif key == "overlap_rule":
                vote[key] = OverlapRule(value)
            elif key == "zero_overlap":
                vote[key] = ZeroOverlapPolicy(value)
            elif key in ("nside", "seed"):
                folds[key] = value
            elif key == "scheme":
                folds[key] = Scheme(value)
            elif key == "ratios":
                folds[key] = tuple(value)
            else:
                top[key] = value
        try:
            return replace(
                self,
                vote=replace(self.vote, **vote),
                folds=replace(self.folds, **folds),
                **top,
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


def load_config(path) -> PipelineConfig:
    """Read a TOML or JSON config file (chosen by extension)."""
    path = Path(path)
    try:
        if path.suffix.lower() == ".toml":
            data = tomllib.loads(path.read_text())
        else:
            data = json.loads(path.read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return PipelineConfig.from_dict(data)
