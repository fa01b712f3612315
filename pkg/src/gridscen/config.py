"""Run configuration: one flat TOML document of key/value pairs.

Relative paths are resolved against the directory of the config file.  The
only environment variable consulted is ``GRIDSCEN_OUT``, which overrides the
output directory.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import os
from dataclasses import dataclass, fields
from pathlib import Path

import tomli
import tomli_w

from .engine import FitOptions
from .errors import ConfigError
from .precision import DEFAULT_GRID

OUT_ENV = "GRIDSCEN_OUT"
_KINDS = {"str": str, "int": int, "float": float, "bool": bool,
          "float | None": float}


@dataclass
class RunConfig:
    load_actuals: str = "load_actual.csv"
    load_forecasts: str = "load_forecast.csv"
    wind_actuals: str = "wind_actual.csv"
    wind_forecasts: str = "wind_forecast.csv"
    solar_actuals: str = "solar_actual.csv"
    solar_forecasts: str = "solar_forecast.csv"
    catalog: str = "catalog.csv"
    out_dir: str = "out"
    target_day: str = "2018-07-01"
    window_n: int = 50
    min_history: int = 60
    scenarios: int = 1000
    seed: int = 0
    lam: float | None = None
    lam_grid: tuple = DEFAULT_GRID
    joint_lam: float | None = None
    distance_base: float = 1.0
    tail_fraction: float = 0.15
    bins: int = 10
    min_bin_count: int = 20
    pca_threshold: float = 0.95
    trim: float = 0.01
    graph_threshold: float = 0.01
    force_empirical: bool = False
    allow_in_sample: bool = True
    base_dir: str = dataclasses.field(default=".", metadata={"internal": True})

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            kind = _KINDS.get(f.type)
            if v is None and "None" in f.type:
                continue
            if kind is float and isinstance(v, int) and not isinstance(v, bool):
                v = float(v)
                setattr(self, f.name, v)
            if kind is not None and (not isinstance(v, kind)
                                     or (kind is int and isinstance(v, bool))):
                raise ConfigError(f"{f.name} must be {kind.__name__}, "
                                  f"got {v!r}")
        try:
            self.lam_grid = tuple(float(v) for v in self.lam_grid)
        except (TypeError, ValueError):
            raise ConfigError("lam_grid must be a list of numbers") from None
        self.validate()

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        try:
            dt.date.fromisoformat(self.target_day)
        except (TypeError, ValueError):
            raise ConfigError(f"target_day {self.target_day!r} is not "
                              "YYYY-MM-DD") from None
        need(self.window_n >= 1, "window_n must be >= 1")
        need(self.min_history >= 1, "min_history must be >= 1")
        need(self.scenarios >= 0, "scenarios must be >= 0")
        need(self.seed >= 0, "seed must be >= 0")
        need(len(self.lam_grid) >= 1 and min(self.lam_grid) >= 0,
             "lam_grid must hold nonnegative values")
        for name in ("lam", "joint_lam"):
            v = getattr(self, name)
            need(v is None or v >= 0, f"{name} must be >= 0")
        need(self.distance_base > 0, "distance_base must be > 0")
        need(0 < self.tail_fraction < 0.5, "tail_fraction must be in (0, 0.5)")
        need(self.bins >= 1, "bins must be >= 1")
        need(self.min_bin_count >= 1, "min_bin_count must be >= 1")
        need(0 < self.pca_threshold <= 1, "pca_threshold must be in (0, 1]")
        need(0 <= self.trim < 0.5, "trim must be in [0, 0.5)")
        need(0 <= self.graph_threshold < 1,
             "graph_threshold must be in [0, 1)")

    @property
    def day(self) -> dt.date:
        return dt.date.fromisoformat(self.target_day)

    def path(self, name) -> Path:
        p = Path(getattr(self, name))
        return p if p.is_absolute() else Path(self.base_dir) / p

    def output_dir(self, override=None) -> Path:
        if override:
            return Path(override)
        env = os.environ.get(OUT_ENV)
        if env:
            return Path(env)
        return self.path("out_dir")

    def fit_options(self) -> FitOptions:
        return FitOptions(
            tail_fraction=self.tail_fraction, num_bins=self.bins,
            min_bin_count=self.min_bin_count,
            pca_threshold=self.pca_threshold, lam=self.lam,
            lam_grid=self.lam_grid, joint_lam=self.joint_lam,
            distance_base=self.distance_base,
            graph_threshold=self.graph_threshold,
            force_empirical=self.force_empirical)

    def to_dict(self):
        out = {}
        for f in fields(self):
            if f.metadata.get("internal"):
                continue
            v = getattr(self, f.name)
            if v is None:
                continue            # TOML has no null: absent means None
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d, base_dir="."):
        known = {f.name for f in fields(cls) if not f.metadata.get("internal")}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        for k, v in d.items():
            if isinstance(v, dict):
                raise ConfigError(f"config must be flat; {k!r} is a table")
        try:
            return cls(**d, base_dir=str(base_dir))
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_toml(cls, text, base_dir="."):
        try:
            d = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"bad TOML: {exc}") from None
        return cls.from_dict(d, base_dir)

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_toml(text, base_dir=path.parent)

    def save(self, path):
        Path(path).write_text(self.to_toml())
