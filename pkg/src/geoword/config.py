"""Pipeline configuration: one flat key = value file, CLI-overridable.

The pipeline has a dozen coupled constants (thresholds, caps, band
limits); recording them in one file keeps runs reproducible. Unknown keys
are rejected so typos fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .geo import GeoPoint


class ConfigError(ValueError):
    """Bad key, bad value, or an unsatisfiable configuration."""


@dataclass
class Config:
    # artifact paths
    gazetteer: str = "gazetteer.tsv"
    stoplist: Optional[str] = None
    train_corpus: str = "posts.tsv"
    model_store: str = "store.gw"
    constructions: str = "constructions.tsv"

    # projection origin; derived from the training data when unset
    origin_lat: Optional[float] = None
    origin_lon: Optional[float] = None

    # voting grid; bounds derived from the model store when unset
    grid_cell_km: float = 50.0
    grid_south: Optional[float] = None
    grid_west: Optional[float] = None
    grid_north: Optional[float] = None
    grid_east: Optional[float] = None

    # model fitting
    k: int = 3
    min_support: int = 10
    k_min_per_component: int = 5
    covariance_floor_km2: float = 1.0
    placeness_constant: float = 100.0
    max_vocab: int = 500_000
    seed: int = 0

    # filtering
    log_t: float = 20.0
    band_low: float = 0.00008
    band_divisor: float = 300.0
    candidate_cap: int = 900
    retain_cap: int = 150
    window_shapes: tuple[str, ...] = ("6+0", "3+3", "0+6")
    yield_log_placeness: float = 20.0

    # evaluation
    radius_km: float = 100.0

    def validate(self) -> None:
        positive = (
            ("grid_cell_km", self.grid_cell_km),
            ("k", self.k),
            ("min_support", self.min_support),
            ("k_min_per_component", self.k_min_per_component),
            ("covariance_floor_km2", self.covariance_floor_km2),
            ("placeness_constant", self.placeness_constant),
            ("max_vocab", self.max_vocab),
            ("band_low", self.band_low),
            ("band_divisor", self.band_divisor),
            ("candidate_cap", self.candidate_cap),
            ("retain_cap", self.retain_cap),
            ("radius_km", self.radius_km),
        )
        for name, value in positive:
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.log_t < 0:
            raise ConfigError(f"log_t must be >= 0, got {self.log_t}")
        if self.yield_log_placeness < 0:
            raise ConfigError("yield_log_placeness must be >= 0")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.k not in (1, 2, 3):
            raise ConfigError(f"k must be 1, 2 or 3, got {self.k}")
        if (self.origin_lat is None) != (self.origin_lon is None):
            raise ConfigError("origin_lat and origin_lon must be set together")
        bounds = (self.grid_south, self.grid_west, self.grid_north, self.grid_east)
        if any(b is not None for b in bounds) and any(b is None for b in bounds):
            raise ConfigError("grid bounds must be set all together or not at all")
        if not self.window_shapes:
            raise ConfigError("window_shapes must not be empty")

    @property
    def origin(self) -> Optional[GeoPoint]:
        if self.origin_lat is None or self.origin_lon is None:
            return None
        return GeoPoint(self.origin_lat, self.origin_lon)

    @property
    def grid_bounds(self) -> Optional[tuple[GeoPoint, GeoPoint]]:
        if self.grid_south is None:
            return None
        return (
            GeoPoint(self.grid_south, self.grid_west),
            GeoPoint(self.grid_north, self.grid_east),
        )


_FIELD_TYPES = {f.name: f.type for f in fields(Config)}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    if key == "window_shapes":
        return tuple(s.strip() for s in raw.split(",") if s.strip())
    ftype = _FIELD_TYPES[key]
    try:
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        if ftype == "Optional[float]":
            return None if raw.lower() in ("", "none") else float(raw)
        if ftype == "Optional[str]":
            return None if raw.lower() in ("", "none") else raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def apply_setting(cfg: Config, key: str, raw: str) -> None:
    setattr(cfg, key.strip(), _parse_value(key.strip(), raw))


def load_config(path: str | Path, overrides: tuple[str, ...] = ()) -> Config:
    """Parse a config file ('key = value' lines, '#' comments), then apply
    'key=value' override strings, then validate."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    cfg = Config()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        apply_setting(cfg, key, raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, _, raw = item.partition("=")
        apply_setting(cfg, key, raw)
    cfg.validate()
    return cfg
