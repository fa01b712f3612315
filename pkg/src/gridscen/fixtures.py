"""Synthetic load/wind/solar data with known structure.

Every quantity is generated from an explicit model so that fitted quantities
can be compared with the truth:

* load deviations: a Kronecker Gaussian (chain precision across zones and
  across hours) pushed through a spliced marginal with uniform body and GPD
  tails;
* wind deviations: independent of everything else, Gaussian with distance
  correlation across farms, spread growing with the forecast;
* solar deviations: rank-3 daily curves under a daylight mask, sharing one
  zone-level factor with the load of a single planted zone.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.special import expit, ndtr

from .ingest import N_LAGS, DeviationPanel, write_series_csv
from .marginals import gpd_inverse_survival
from .sampler import sample_kronecker, spawn_generators

TAIL_PROB = 0.15


@dataclass
class FixtureSpec:
    n_zones: int = 8
    n_wind: int = 20
    n_solar: int = 30
    n_days: int = 730
    start: str = "2017-01-01"
    seed: int = 0
    load_xi: float = 0.2
    load_scale: float = 40.0
    load_tail_scale: float | None = None   # GPD beta; None keeps density continuous
    spatial_pc: float = 0.3        # partial correlation between neighbour zones
    temporal_pc: float = 0.45      # partial correlation between adjacent hours
    sunrise: int = 7
    sunset: int = 19
    solar_rank: int = 3
    planted_zone: int = 0
    planted_corr: float = 0.7

    @property
    def days(self):
        first = dt.date.fromisoformat(self.start)
        return tuple(first + dt.timedelta(days=k) for k in range(self.n_days))


@dataclass
class Fixture:
    spec: FixtureSpec
    zones: tuple
    catalog: pd.DataFrame
    actual: dict            # quantity -> (units, 24, days)
    forecast: dict
    truth: dict = field(default_factory=dict)

    def units(self, quantity):
        if quantity == "load":
            return self.zones
        cat = self.catalog
        return tuple(cat.loc[cat["quantity"] == quantity, "asset_id"])

    def panel(self, quantity) -> DeviationPanel:
        act, fc = self.actual[quantity], self.forecast[quantity]
        return DeviationPanel(self.units(quantity), self.spec.days,
                              act - fc, fc.copy())

    def panels(self):
        return {q: self.panel(q) for q in ("load", "wind", "solar")}

    def frame(self, quantity, kind="actual"):
        arr = (self.actual if kind == "actual" else self.forecast)[quantity]
        units = self.units(quantity)
        stamps = pd.DatetimeIndex([pd.Timestamp(d) + pd.Timedelta(hours=h)
                                   for d in self.spec.days
                                   for h in range(N_LAGS)])
        n = len(stamps)
        return pd.DataFrame({
            "unit_id": np.repeat(np.array(units, dtype=object), n),
            "timestamp": np.tile(stamps, len(units)),
            # (unit, lag, day) -> unit-major, then day, then hour
            "value": arr.transpose(0, 2, 1).reshape(-1),
        })

    def write(self, out_dir):
        """Write series CSVs, the catalog and ``truth.json`` to ``out_dir``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {}
        for q in ("load", "wind", "solar"):
            for kind in ("actual", "forecast"):
                path = out / f"{q}_{kind}.csv"
                write_series_csv(self.frame(q, kind), path)
                paths[f"{q}_{kind}"] = path.name
        self.catalog.to_csv(out / "catalog.csv", index=False,
                            float_format="%.6f")
        (out / "truth.json").write_text(json.dumps(self.truth, indent=2,
                                                   sort_keys=True))
        return paths


def tridiagonal_precision(n, pc):
    return np.eye(n) - pc * (np.eye(n, k=1) + np.eye(n, k=-1))


def precision_to_correlation(theta):
    sigma = np.linalg.inv(theta)
    d = np.sqrt(np.diag(sigma))
    return sigma / np.outer(d, d)


def continuous_tail_scale(tail=TAIL_PROB):
    """GPD scale that makes the spliced density continuous at +-1."""
    return 2 * tail / (1 - 2 * tail)


def spliced_quantile(u, xi, tail=TAIL_PROB, beta=None):
    """Uniform body on [-1, 1] with GPD(xi, beta) tails beyond +-1."""
    beta = continuous_tail_scale(tail) if beta is None else beta
    u = np.asarray(u, dtype=float)
    x = -1 + 2 * (u - tail) / (1 - 2 * tail)
    hi = u > 1 - tail
    lo = u < tail
    x = np.where(hi, 1 + gpd_inverse_survival(np.where(hi, (1 - u) / tail,
                                                       0.5), xi, beta), x)
    x = np.where(lo, -1 - gpd_inverse_survival(np.where(lo, u / tail, 0.5),
                                               xi, beta), x)
    return x


def daylight_shape(sunrise, sunset):
    h = np.arange(N_LAGS)
    s = np.sin(np.pi * (h - sunrise + 0.5) / (sunset - sunrise + 1))
    s[(h < sunrise) | (h > sunset)] = 0.0
    return np.clip(s, 0.0, None)


def _edges(theta):
    n = theta.shape[0]
    return [[i, j] for i in range(n) for j in range(i + 1, n)
            if theta[i, j] != 0]


def generate_fixture(spec: FixtureSpec | None = None) -> Fixture:
    spec = spec or FixtureSpec()
    rng_load, rng_wind, rng_solar, rng_cat = spawn_generators(spec.seed, 4)
    n_days = spec.n_days
    days = spec.days
    doy = np.array([d.timetuple().tm_yday for d in days])
    hours = np.arange(N_LAGS)
    zones = tuple(f"Z{g + 1}" for g in range(spec.n_zones))

    # ---- catalog
    wind_ids = [f"W{a + 1:02d}" for a in range(spec.n_wind)]
    solar_ids = [f"S{a + 1:02d}" for a in range(spec.n_solar)]
    wind_zone = np.arange(spec.n_wind) % spec.n_zones
    solar_zone = np.arange(spec.n_solar) % spec.n_zones
    wind_xy = rng_cat.uniform(0, 100, (spec.n_wind, 2))
    solar_xy = rng_cat.uniform(0, 100, (spec.n_solar, 2))
    wind_cap = rng_cat.uniform(50, 200, spec.n_wind).round(1)
    solar_cap = rng_cat.uniform(20, 120, spec.n_solar).round(1)
    catalog = pd.DataFrame({
        "asset_id": wind_ids + solar_ids,
        "quantity": ["wind"] * spec.n_wind + ["solar"] * spec.n_solar,
        "zone_id": [zones[g] for g in wind_zone] + [zones[g] for g in solar_zone],
        "x": np.r_[wind_xy[:, 0], solar_xy[:, 0]],
        "y": np.r_[wind_xy[:, 1], solar_xy[:, 1]],
        "capacity_mw": np.r_[wind_cap, solar_cap],
    })

    # ---- load
    theta_s = tridiagonal_precision(spec.n_zones, spec.spatial_pc)
    theta_t = tridiagonal_precision(N_LAGS, spec.temporal_pc)
    sig_s, sig_t = precision_to_correlation(theta_s), precision_to_correlation(theta_t)
    Z = sample_kronecker(sig_s, sig_t, n_days, rng_load, flatten=False)
    Z = Z.transpose(1, 2, 0)                       # (zone, lag, day)
    zone_size = np.linspace(0.6, 1.4, spec.n_zones)
    profile = 1 + 0.3 * np.sin(2 * np.pi * (hours - 9) / 24)
    season = 1 + 0.15 * np.cos(2 * np.pi * (doy - 200) / 365.25)
    load_fc = 1000 * zone_size[:, None, None] * profile[None, :, None] * season
    load_fc = load_fc + rng_load.normal(0, 5, load_fc.shape)
    scale = spec.load_scale * zone_size
    beta = (continuous_tail_scale() if spec.load_tail_scale is None
            else spec.load_tail_scale)
    load_dev = scale[:, None, None] * spliced_quantile(ndtr(Z), spec.load_xi,
                                                       beta=beta)
    load_act = load_fc + load_dev

    # diurnal load aggregate of the planted zone, standardized by its model sd
    h_day = np.zeros(N_LAGS)
    h_day[spec.sunrise:spec.sunset + 1] = 1.0
    agg_sd = np.sqrt(h_day @ sig_t @ h_day)
    link = (h_day @ Z[spec.planted_zone]) / agg_sd

    # ---- wind
    d = np.sqrt(((wind_xy[:, None] - wind_xy[None]) ** 2).sum(-1))
    wind_sp = np.exp(-d / 30.0)
    wind_tm = 0.8 ** np.abs(hours[:, None] - hours[None])
    E = sample_kronecker(wind_sp, wind_tm, n_days, rng_wind,
                         flatten=False).transpose(1, 2, 0)
    g = np.empty((spec.n_wind, n_days * N_LAGS))
    g[:, 0] = rng_wind.standard_normal(spec.n_wind)
    shocks = rng_wind.standard_normal(g.shape) * np.sqrt(1 - 0.97 ** 2)
    for t in range(1, g.shape[1]):
        g[:, t] = 0.97 * g[:, t - 1] + shocks[:, t]
    level = 0.05 + 0.9 * expit(1.5 * g)
    wind_fc = wind_cap[:, None, None] * level.reshape(
        spec.n_wind, n_days, N_LAGS).transpose(0, 2, 1)
    spread = wind_cap[:, None, None] * 0.02 + 0.15 * wind_fc
    wind_act = np.clip(wind_fc + spread * E, 0.0, wind_cap[:, None, None])

    # ---- solar
    shape = daylight_shape(spec.sunrise, spec.sunset)
    t = np.clip((hours - spec.sunrise) / max(spec.sunset - spec.sunrise, 1),
                0, 1)
    basis = np.vstack([np.ones(N_LAGS), np.cos(np.pi * t),
                       np.cos(2 * np.pi * t)])[:spec.solar_rank]
    weights = np.array([1.0, 0.6, 0.4])[:spec.solar_rank]
    common = rng_solar.standard_normal((spec.n_zones, spec.solar_rank, n_days))
    common[spec.planted_zone, 0] = (
        spec.planted_corr * link
        + np.sqrt(1 - spec.planted_corr ** 2) * common[spec.planted_zone, 0])
    own = rng_solar.standard_normal((spec.n_solar, spec.solar_rank, n_days))
    rho = 0.8
    factors = rho * common[solar_zone] + np.sqrt(1 - rho ** 2) * own
    curves = np.einsum("akd,k,kh->ahd", factors, weights, basis)
    sun_season = 0.75 + 0.25 * np.cos(2 * np.pi * (doy - 172) / 365.25)
    envelope = (solar_cap[:, None, None] * shape[None, :, None]
                * sun_season[None, None, :])
    solar_fc = 0.5 * envelope
    solar_act = solar_fc + 0.35 * envelope * np.tanh(0.5 * curves)

    truth = {
        "spec": asdict(spec),
        "zones": list(zones),
        "load": {
            "xi": spec.load_xi,
            "beta": beta,
            "tail_fraction": TAIL_PROB,
            "scale_mw": scale.tolist(),
            "spatial_precision": theta_s.tolist(),
            "temporal_precision": theta_t.tolist(),
            "spatial_edges": _edges(theta_s),
            "temporal_edges": _edges(theta_t),
        },
        "wind": {"independent": True, "assets": wind_ids,
                 "spread": "0.02 capacity + 0.15 forecast"},
        "solar": {"rank": spec.solar_rank, "sunrise_lag": spec.sunrise,
                  "sunset_lag": spec.sunset, "assets": solar_ids},
        "joint": {"planted_edges": [[f"load:{zones[spec.planted_zone]}",
                                     f"solar:{zones[spec.planted_zone]}"]]},
    }
    return Fixture(spec, zones, catalog,
                   {"load": load_act, "wind": wind_act, "solar": solar_act},
                   {"load": load_fc, "wind": wind_fc, "solar": solar_fc},
                   truth)


def truth_schema() -> dict:
    text = resources.files("gridscen").joinpath("truth_schema.json").read_text()
    return json.loads(text)
