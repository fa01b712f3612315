"""Joint load/wind/solar scenario engine.

Fitting
    Each quantity is Gaussianized per (unit, lag).  Wind and solar are summed
    to zones, every zonal series is summed over the daylight lags, and a plain
    graphical lasso on those daily aggregates couples the three quantities.
    Separable models describe the within-quantity structure: load over
    zones x lags, wind over farms x lags (distance penalty across farms) and
    solar over assets x PCA components.

Simulation
    Wind is simulated on its own stream when the joint graph shows no wind
    edge.  The load and solar daily aggregates are drawn from the joint model,
    then the full load and solar fields are drawn conditionally on those
    aggregates, exactly, and mapped back through the marginals.
"""

from __future__ import annotations

import datetime as dt
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.special import ndtr

from .errors import DataError, NoDaylight, UnitMismatch
from .ingest import N_LAGS, DayWindow, DeviationPanel, select_history
from .marginals import (BinnedConditionalModel, conditional_sample_value,
                        degaussianize_grid, fit_conditional_bins,
                        fit_marginal_grid, gaussianize_grid, model_from_dict)
from .precision import (DEFAULT_GRID, PrecisionEstimate,
                        SeparableGaussianModel, dependency_graph,
                        distance_penalty, gemini, glasso,
                        sample_correlation, select_penalty)
from .sampler import (KroneckerConditioner, independent_rows, psd_factor,
                      sample_kronecker, spawn_generators)
from .solarpca import SolarPcaModel, fit_solar_pca

logger = logging.getLogger(__name__)

QUANTITIES = ("load", "wind", "solar")
CONSTRAINT_TOL = 1e-6


@dataclass(frozen=True)
class Asset:
    asset_id: str
    quantity: str
    zone_id: str
    x: float
    y: float
    capacity: float


@dataclass
class AssetCatalog:
    assets: list
    zones: tuple

    def __post_init__(self):
        for a in self.assets:
            if a.quantity not in ("wind", "solar"):
                raise DataError(f"asset {a.asset_id}: unknown quantity "
                                f"{a.quantity!r}")
            if a.zone_id not in self.zones:
                raise UnitMismatch(f"asset {a.asset_id} in unknown zone "
                                   f"{a.zone_id!r}")

    @classmethod
    def from_frame(cls, df: pd.DataFrame, zones=None):
        need = {"asset_id", "quantity", "zone_id", "x", "y", "capacity_mw"}
        if not need <= set(df.columns):
            raise DataError(f"catalog lacks columns {sorted(need - set(df.columns))}")
        assets = [Asset(str(r.asset_id), str(r.quantity), str(r.zone_id),
                        float(r.x), float(r.y), float(r.capacity_mw))
                  for r in df.itertuples(index=False)]
        if zones is None:
            zones = sorted({a.zone_id for a in assets})
        return cls(assets, tuple(zones))

    @classmethod
    def from_csv(cls, path, zones=None):
        return cls.from_frame(pd.read_csv(path, dtype={"asset_id": str,
                                                       "zone_id": str}), zones)

    def units(self, quantity):
        if quantity == "load":
            return self.zones
        return tuple(a.asset_id for a in self.assets if a.quantity == quantity)

    def lookup(self, asset_id) -> Asset:
        for a in self.assets:
            if a.asset_id == asset_id:
                return a
        raise UnitMismatch(f"asset {asset_id!r} not in catalog")

    def capacity(self, quantity):
        return np.array([self.lookup(u).capacity for u in self.units(quantity)])

    def locations(self, quantity):
        return {a.asset_id: (a.x, a.y) for a in self.assets
                if a.quantity == quantity}

    def zone_matrix(self, quantity):
        """Membership matrix (zones with assets) x assets, and those zones."""
        units = self.units(quantity)
        zone_of = [self.lookup(u).zone_id for u in units]
        present = tuple(z for z in self.zones if z in zone_of)
        M = np.array([[1.0 if zu == z else 0.0 for zu in zone_of]
                      for z in present]).reshape(len(present), len(units))
        return M, present

    def to_dict(self):
        return {"zones": list(self.zones),
                "assets": [a.__dict__ for a in self.assets]}

    @classmethod
    def from_dict(cls, d):
        return cls([Asset(**a) for a in d["assets"]], tuple(d["zones"]))


@dataclass
class FitOptions:
    tail_fraction: float = 0.15
    num_bins: int = 10
    min_bin_count: int = 20
    pca_threshold: float = 0.95
    lam: float | None = None            # scalar penalty; None selects by EBIC
    lam_grid: tuple = DEFAULT_GRID
    joint_lam: float | None = None      # joint aggregate model; None -> EBIC
    distance_base: float = 1.0
    graph_threshold: float = 0.01
    force_empirical: bool = False       # normal load marginals (ablation)
    daylight_fraction: float = 0.05


@dataclass
class FittedSystem:
    catalog: AssetCatalog
    marginals: dict                    # quantity -> [unit][lag] models
    load_model: SeparableGaussianModel
    wind_model: SeparableGaussianModel
    wind_bins: list
    solar_model: SolarPcaModel
    joint: PrecisionEstimate
    joint_labels: list
    wind_independent: bool
    sunrise_lag: int
    sunset_lag: int
    target_day: dt.date | None = None
    history_days: int = 0
    in_sample: bool = False
    options: FitOptions = field(default_factory=FitOptions)

    @property
    def daylight(self):
        return list(range(self.sunrise_lag, self.sunset_lag + 1))

    def joint_graph(self, threshold=None):
        t = self.options.graph_threshold if threshold is None else threshold
        return dependency_graph(self.joint, self.joint_labels, t)

    def to_dict(self):
        return {
            "catalog": self.catalog.to_dict(),
            "marginals": {q: [[m.to_dict() for m in row] for row in grid]
                          for q, grid in self.marginals.items()},
            "load_model": self.load_model.to_dict(),
            "wind_model": self.wind_model.to_dict(),
            "wind_bins": [b.to_dict() for b in self.wind_bins],
            "solar_model": self.solar_model.to_dict(),
            "joint": self.joint.to_dict(),
            "joint_labels": list(self.joint_labels),
            "wind_independent": bool(self.wind_independent),
            "sunrise_lag": int(self.sunrise_lag),
            "sunset_lag": int(self.sunset_lag),
            "target_day": (self.target_day.isoformat()
                           if self.target_day else None),
            "history_days": int(self.history_days),
            "in_sample": bool(self.in_sample),
            "options": {k: (list(v) if isinstance(v, tuple) else v)
                        for k, v in self.options.__dict__.items()},
        }

    @classmethod
    def from_dict(cls, d):
        opts = dict(d["options"])
        opts["lam_grid"] = tuple(opts["lam_grid"])
        return cls(
            AssetCatalog.from_dict(d["catalog"]),
            {q: [[model_from_dict(m) for m in row] for row in grid]
             for q, grid in d["marginals"].items()},
            SeparableGaussianModel.from_dict(d["load_model"]),
            SeparableGaussianModel.from_dict(d["wind_model"]),
            [BinnedConditionalModel.from_dict(b) for b in d["wind_bins"]],
            SolarPcaModel.from_dict(d["solar_model"]),
            PrecisionEstimate.from_dict(d["joint"]),
            list(d["joint_labels"]),
            d["wind_independent"], d["sunrise_lag"], d["sunset_lag"],
            dt.date.fromisoformat(d["target_day"]) if d["target_day"] else None,
            d["history_days"], d["in_sample"], FitOptions(**opts))


@dataclass
class ScenarioSet:
    target_day: dt.date
    quantity: str
    units: tuple
    scenarios: np.ndarray              # (m, units, 24) MW
    forecasts: np.ndarray              # (units, 24)
    metadata: dict = field(default_factory=dict)
    latent: np.ndarray | None = None   # (m, units, 24) Gaussianized draws
    targets: np.ndarray | None = None  # (m, zones) step-1 daylight sums

    @property
    def m(self):
        return self.scenarios.shape[0]


def detect_diurnal_range(solar_actuals, min_fraction=0.05):
    """First and last lag with positive pooled solar output on at least
    ``min_fraction`` of the days.

    ``solar_actuals`` is ``(assets, 24, days)``.
    """
    pooled = np.asarray(solar_actuals, dtype=float).sum(axis=0)   # (24, N)
    frac = (pooled > 0).mean(axis=1)
    lit = np.flatnonzero(frac >= min_fraction)
    if lit.size == 0:
        raise NoDaylight("solar output is zero at every lag")
    return int(lit[0]), int(lit[-1])


def _zone_sums(z, membership):
    """(assets, 24, N) -> (zones, 24, N)."""
    return np.einsum("ga,alk->glk", membership, z)


def _daily_aggregate(z, lags):
    return z[:, lags, :].sum(axis=1)


def _summarize_warnings(caught):
    """Re-issue recorded per-series warnings once per category."""
    counts = {}
    for w in caught:
        counts.setdefault(w.category, []).append(str(w.message))
    for cat, msgs in counts.items():
        warnings.warn(f"{len(msgs)} marginal fits: {msgs[0]}"
                      + (" (and similar)" if len(msgs) > 1 else ""),
                      cat, stacklevel=3)


def fit_system(panels: dict, catalog: AssetCatalog,
               options: FitOptions | None = None,
               window: DayWindow | None = None) -> FittedSystem:
    """Fit every component on the days of ``panels`` (already windowed).

    Parameters
    ----------
    panels : dict
        ``{"load", "wind", "solar"}`` -> :class:`DeviationPanel`, same days.
    catalog : AssetCatalog
    options : FitOptions
    window : DayWindow, optional
        Recorded in the fitted system for reporting.
    """
    opt = options or FitOptions()
    for q in QUANTITIES:
        if tuple(panels[q].units) != tuple(catalog.units(q)):
            raise UnitMismatch(f"{q} panel units differ from the catalog")
    days = panels["load"].days
    if any(panels[q].days != days for q in QUANTITIES):
        raise DataError("panels must cover the same days")

    load, wind, solar = (panels[q] for q in QUANTITIES)
    sunrise, sunset = detect_diurnal_range(solar.actuals,
                                           opt.daylight_fraction)
    lags = list(range(sunrise, sunset + 1))

    # (1) marginals and Gaussianization
    load_kind = "normal" if opt.force_empirical else "gpd"
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        margins = {
            "load": fit_marginal_grid(load.deviations, load_kind,
                                      opt.tail_fraction),
            "wind": fit_marginal_grid(wind.deviations, "empirical"),
            "solar": fit_marginal_grid(solar.deviations, "empirical"),
        }
    _summarize_warnings(caught)
    z = {q: gaussianize_grid(panels[q].deviations, margins[q])
         for q in QUANTITIES}

    # (2)-(3) zonal sums and daylight aggregates
    wind_M, wind_zones = catalog.zone_matrix("wind")
    solar_M, solar_zones = catalog.zone_matrix("solar")
    blocks = [("load", catalog.zones, _daily_aggregate(z["load"], lags)),
              ("wind", wind_zones,
               _daily_aggregate(_zone_sums(z["wind"], wind_M), lags)),
              ("solar", solar_zones,
               _daily_aggregate(_zone_sums(z["solar"], solar_M), lags))]
    labels = [f"{q}:{g}" for q, zs, _ in blocks for g in zs]
    agg = np.vstack([a for _, _, a in blocks]).T          # (N, nodes)

    # (4) plain glasso on the aggregates
    S = sample_correlation(agg, constant="isolate")
    joint_lam = opt.joint_lam if opt.joint_lam is not None else opt.lam
    if joint_lam is None:
        joint = select_penalty(S, agg.shape[0], grid=opt.lam_grid)
    else:
        joint = glasso(S, joint_lam)

    # (5) wind independence
    graph = dependency_graph(joint, labels, opt.graph_threshold)
    wind_nodes = {i for i, lab in enumerate(labels) if lab.startswith("wind:")}
    cross = [(i, j) for i, j, _ in graph.edges
             if (i in wind_nodes) != (j in wind_nodes)]
    wind_independent = not cross
    if not wind_independent:
        warnings.warn(f"joint graph links wind to other quantities "
                      f"({len(cross)} edges); wind will be conditioned too",
                      UserWarning, stacklevel=2)

    # (6) separable models
    to_days = lambda a: a.transpose(2, 0, 1)               # (N, p, 24)
    load_model = gemini(to_days(z["load"]), opt.lam, opt.lam,
                        grid=opt.lam_grid, unit_order=catalog.zones,
                        lag_order=tuple(range(N_LAGS)))
    wind_units = catalog.units("wind")
    # penalty scale (grid value or lam) times distance / mean distance
    row_base = (distance_penalty(catalog.locations("wind"), wind_units,
                                 opt.distance_base)
                if len(wind_units) > 1 else None)
    wind_model = gemini(to_days(z["wind"]), opt.lam, opt.lam,
                        row_base=row_base, grid=opt.lam_grid,
                        unit_order=wind_units,
                        lag_order=tuple(range(N_LAGS)))
    solar_model = fit_solar_pca(z["solar"], opt.pca_threshold,
                                lam_row=opt.lam, lam_col=opt.lam,
                                units=catalog.units("solar"),
                                grid=opt.lam_grid)

    # wind reconstruction: per farm, pooled over lags
    wind_bins = [fit_conditional_bins(wind.forecasts[a].ravel(),
                                      wind.deviations[a].ravel(),
                                      opt.num_bins, opt.min_bin_count)
                 for a in range(len(wind_units))]

    logger.info("fit on %d days: daylight %d-%d, wind_independent=%s, "
                "joint lambda=%s, solar k=%d", len(days), sunrise, sunset,
                wind_independent, joint.penalty, solar_model.k)
    return FittedSystem(
        catalog, margins, load_model, wind_model, wind_bins, solar_model,
        joint, labels, wind_independent, sunrise, sunset,
        window.target_day if window else None,
        len(window) if window else len(days),
        window.in_sample if window else False, opt)


def fit_for_day(panels: dict, catalog: AssetCatalog, target_day: dt.date,
                n: int = 50, min_days: int = 60,
                options: FitOptions | None = None,
                allow_in_sample: bool = True) -> FittedSystem:
    """Select the history window of ``target_day`` and fit on it only."""
    window = select_history(target_day, panels["load"].days, n, min_days)
    if window.in_sample and not allow_in_sample:
        raise DataError(f"no prior-year history for {target_day} and the "
                        "in-sample fallback is disabled")
    sub = {q: panels[q].subset(window.history_days) for q in QUANTITIES}
    return fit_system(sub, catalog, options, window)


def _joint_block(system: FittedSystem, prefixes):
    idx = [i for i, lab in enumerate(system.joint_labels)
           if lab.split(":")[0] in prefixes]
    return idx, system.joint.sigma[np.ix_(idx, idx)]


def _aggregate_sd(sigma_s, membership, sigma_t_weights):
    """Model sd of ``membership @ X @ w`` for X ~ MN(0, sigma_s, .)."""
    return np.sqrt(np.diag(membership @ sigma_s @ membership.T)
                   * sigma_t_weights)


def generate_scenarios(system: FittedSystem, forecasts: dict, m: int,
                       seed: int, target_day: dt.date | None = None,
                       check: bool = True) -> dict:
    """Simulate ``m`` joint scenarios of actuals.

    Parameters
    ----------
    forecasts : dict
        quantity -> ``(units, 24)`` forecasts for the target day.
    seed : int
        Root seed; wind, the joint aggregates, load and solar use separate
        derived streams.

    Returns
    -------
    dict
        quantity -> :class:`ScenarioSet`.
    """
    cat = system.catalog
    lags = system.daylight
    h = np.zeros(N_LAGS)
    h[lags] = 1.0
    rng_wind, rng_joint, rng_load, rng_solar = spawn_generators(seed, 4)
    fc = {q: np.asarray(forecasts[q], dtype=float) for q in QUANTITIES}
    for q in QUANTITIES:
        if fc[q].shape != (len(cat.units(q)), N_LAGS):
            raise UnitMismatch(f"{q} forecasts have shape {fc[q].shape}")

    # step 1: daily aggregates
    coupled = ("load", "solar") if system.wind_independent else QUANTITIES
    idx, sigma = _joint_block(system, coupled)
    L = psd_factor(sigma, repair=True)
    y = rng_joint.standard_normal((m, len(idx))) @ L.T
    labels = [system.joint_labels[i] for i in idx]
    y_of = {q: y[:, [k for k, lab in enumerate(labels)
                     if lab.startswith(q + ":")]] for q in coupled}

    out = {}
    # load: condition zone daylight sums
    lm = system.load_model
    sig_s, sig_t = lm.spatial.sigma, lm.temporal.sigma
    sd = _aggregate_sd(sig_s, np.eye(len(cat.zones)), h @ sig_t @ h)
    X = sample_kronecker(sig_s, sig_t, m, rng_load, repair=True,
                         flatten=False)
    cond = KroneckerConditioner(sig_s, sig_t, np.eye(len(cat.zones)), h)
    B = (y_of["load"] * sd)[:, :, None]
    Xc = cond.apply(X, B)
    if check and m:
        err = np.abs(cond.residual(Xc, B)).max()
        assert err <= CONSTRAINT_TOL, f"load aggregate mismatch {err:.2e}"
    latent, targets = {"load": Xc}, {"load": B[:, :, 0]}
    load_dev = degaussianize_grid(Xc, system.marginals["load"])
    out["load"] = load_dev + fc["load"]

    # solar: condition zone daylight sums through the component scores
    sm = system.solar_model
    w, offset = sm.sum_weights(lags)
    M, present = cat.zone_matrix("solar")
    a_s, a_t = sm.separable.spatial.sigma, sm.separable.temporal.sigma
    S = sample_kronecker(a_s, a_t, m, rng_solar, repair=True, flatten=False)
    if np.abs(w).max() > 0 and M.shape[0]:
        keep = independent_rows(M)
        M = M[keep]
        sd = _aggregate_sd(a_s, M, w @ a_t @ w)
        cond = KroneckerConditioner(a_s, a_t, M, w[None, :])
        B = (y_of["solar"][:, keep] * sd)[:, :, None]
        S = cond.apply(S, B)
        if check and m:
            err = np.abs(cond.residual(S, B)).max()
            assert err <= CONSTRAINT_TOL, f"solar aggregate mismatch {err:.2e}"
        n_assets = M.sum(axis=1)
        targets["solar"] = B[:, :, 0] + n_assets * offset
    zs = sm.reconstruct(S)                                   # (m, A, 24)
    latent["solar"] = zs
    solar_dev = degaussianize_grid(zs, system.marginals["solar"])
    cap = cat.capacity("solar")[None, :, None]
    out["solar"] = np.clip(fc["solar"] + solar_dev, 0.0, cap)

    # wind: own stream, optionally conditioned on its zone aggregates
    wm = system.wind_model
    w_s, w_t = wm.spatial.sigma, wm.temporal.sigma
    Zw = sample_kronecker(w_s, w_t, m, rng_wind, repair=True, flatten=False)
    if not system.wind_independent:
        M, _ = cat.zone_matrix("wind")
        keep = independent_rows(M)
        M = M[keep]
        sd = _aggregate_sd(w_s, M, h @ w_t @ h)
        cond = KroneckerConditioner(w_s, w_t, M, h)
        Zw = cond.apply(Zw, (y_of["wind"][:, keep] * sd)[:, :, None])
    latent["wind"] = Zw
    U = ndtr(Zw)
    wind_dev = np.empty_like(U)
    for a, bins in enumerate(system.wind_bins):
        for lag in range(N_LAGS):
            wind_dev[:, a, lag] = conditional_sample_value(
                bins, fc["wind"][a, lag], U[:, a, lag])
    cap = cat.capacity("wind")[None, :, None]
    out["wind"] = np.clip(fc["wind"] + wind_dev, 0.0, cap)

    meta = {"seed": seed, "in_sample": system.in_sample,
            "wind_independent": system.wind_independent}
    return {q: ScenarioSet(target_day, q, cat.units(q), out[q], fc[q],
                           dict(meta), latent[q], targets.get(q))
            for q in QUANTITIES}


def band_statistics(scenarios, trim=0.01, actuals=None, floor=1.0):
    """Per-(unit, lag) ``[trim, 1 - trim]`` band across scenarios.

    Parameters
    ----------
    scenarios : ndarray, shape (m, units, 24) or ScenarioSet
    actuals : ndarray, shape (units, 24), optional
        When given, also return the MAPE of every scenario, averaged over
        lags and units, with ``|actual|`` floored at ``floor`` MW.

    Returns
    -------
    dict with ``lower``, ``upper`` and optionally ``mape`` (shape (m,)).
    """
    if isinstance(scenarios, ScenarioSet):
        scenarios = scenarios.scenarios
    X = np.asarray(scenarios, dtype=float)
    if X.shape[0] == 0:
        nan = np.full(X.shape[1:], np.nan)
        out = {"lower": nan, "upper": nan.copy()}
    else:
        out = {"lower": np.quantile(X, trim, axis=0),
               "upper": np.quantile(X, 1 - trim, axis=0)}
    if actuals is not None:
        act = np.asarray(actuals, dtype=float)
        denom = np.maximum(np.abs(act), floor)
        out["mape"] = (np.abs(X - act) / denom).mean(axis=(1, 2))
    return out


def forecasts_for_day(panels: dict, day: dt.date) -> dict:
    """Forecast matrices of ``day`` taken from the panels."""
    out = {}
    for q in QUANTITIES:
        idx = panels[q].day_index([day])
        if idx.size == 0:
            raise DataError(f"no {q} forecasts for {day}")
        out[q] = panels[q].forecasts[:, :, idx[0]]
    return out


def actuals_for_day(panels: dict, day: dt.date) -> dict:
    out = {}
    for q in QUANTITIES:
        idx = panels[q].day_index([day])
        if idx.size == 0:
            raise DataError(f"no {q} actuals for {day}")
        out[q] = panels[q].actuals[:, :, idx[0]]
    return out
