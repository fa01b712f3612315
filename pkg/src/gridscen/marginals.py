"""Invertible marginal distributions for deviation series.

Three fitted families share the ``cdf``/``quantile`` interface:

* :class:`GpdTailModel` -- interpolated empirical body spliced with
  generalized Pareto tails on both sides (used for load).
* :class:`EmpiricalModel` -- interpolated empirical CDF with exponential
  extrapolation past the sample extremes (wind, solar).
* :class:`NormalModel` -- fitted normal law, for the Gaussian-marginal
  ablation.

:class:`PointMassModel` stands in for constant series (night-time solar) and
:class:`BinnedConditionalModel` holds deviation distributions conditional on
the forecast level.
"""

from __future__ import annotations

import logging
import warnings

import numpy as np
from scipy import optimize
from scipy.special import ndtr, ndtri

from .errors import DegenerateSample, FallbackWarning, HeavyTailWarning

logger = logging.getLogger(__name__)

# floor on probabilities handed to the normal quantile
TINY = 1e-12
XI_ZERO = 1e-6
MIN_GPD_SAMPLE = 100


def _clip_prob(u):
    return np.clip(u, TINY, 1.0 - TINY)


def _knots(sample):
    """Distinct sorted values and their mid-rank plotting positions."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    values, first, counts = np.unique(x, return_index=True, return_counts=True)
    # Hazen position (i - 1/2)/N averaged over ties
    probs = (first + 0.5 * counts) / n
    return values, probs


# -- generalized Pareto primitives -------------------------------------------

def gpd_survival(z, xi, beta):
    """Survival function ``(1 + xi z / beta)^(-1/xi)`` of a GPD, ``z >= 0``."""
    z = np.asarray(z, dtype=float)
    a = xi * z / beta
    if abs(xi) < XI_ZERO:
        expo = (z / beta) * (1.0 - a / 2.0 + a * a / 3.0)
        return np.exp(-expo)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.exp(-np.log1p(a) / xi)
    # past the finite endpoint when xi < 0
    return np.where(1.0 + a <= 0.0, 0.0, out)


def gpd_inverse_survival(s, xi, beta):
    """Exceedance ``z`` with ``gpd_survival(z) == s`` for ``s`` in (0, 1]."""
    s = np.asarray(s, dtype=float)
    ls = np.log(s)
    if abs(xi) < XI_ZERO:
        return -beta * ls * (1.0 - xi * ls / 2.0 + (xi * ls) ** 2 / 6.0)
    return beta * np.expm1(-xi * ls) / xi


def gpd_nll(params, y):
    """Negative log-likelihood of exceedances ``y`` at ``(xi, log beta)``."""
    xi, log_beta = params
    beta = np.exp(log_beta)
    a = xi * y / beta
    if np.any(1.0 + a <= 0.0) or xi <= -1.0:
        return np.inf
    if abs(xi) < XI_ZERO:
        return y.size * log_beta + np.sum(y) / beta
    return y.size * log_beta + (1.0 + 1.0 / xi) * np.sum(np.log1p(a))


def gpd_pwm(y):
    """Probability-weighted-moment estimate of ``(xi, beta)``."""
    y = np.sort(y)
    n = y.size
    p = (np.arange(1, n + 1) - 0.35) / n
    a0 = y.mean()
    a1 = np.mean((1.0 - p) * y)
    k = a0 / (a0 - 2.0 * a1) - 2.0
    beta = 2.0 * a0 * a1 / (a0 - 2.0 * a1)
    return -k, beta


def fit_gpd(exceedances):
    """Maximum-likelihood ``(xi, beta, method)`` for positive exceedances.

    Starts from the PWM estimate and returns it (``method="pwm"``) when the
    likelihood optimisation fails.
    """
    y = np.asarray(exceedances, dtype=float)
    y = y[y > 0]
    if y.size < 3 or np.ptp(y) == 0:
        raise DegenerateSample("too few distinct exceedances for a GPD fit")
    xi0, beta0 = gpd_pwm(y)
    if not np.isfinite(beta0) or beta0 <= 0 or xi0 <= -1:
        xi0, beta0 = 0.0, float(y.mean())
    if 1.0 + xi0 * y.max() / beta0 <= 0:
        beta0 = -xi0 * y.max() * 1.01
    res = optimize.minimize(gpd_nll, x0=[xi0, np.log(beta0)], args=(y,),
                            method="Nelder-Mead",
                            options={"xatol": 1e-8, "fatol": 1e-10,
                                     "maxiter": 4000})
    xi, log_beta = res.x
    if res.success and np.isfinite(res.fun) and xi > -1:
        return float(xi), float(np.exp(log_beta)), "mle"
    xi, beta = gpd_pwm(y)
    if not (np.isfinite(beta) and beta > 0):
        raise DegenerateSample("GPD estimation failed")
    warnings.warn("GPD likelihood did not converge, using PWM",
                  FallbackWarning, stacklevel=2)
    return float(xi), float(beta), "pwm"


# -- marginal models ---------------------------------------------------------

class MarginalModel:
    kind = "abstract"

    def cdf(self, x):
        raise NotImplementedError

    def quantile(self, u):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def median(self):
        return float(self.quantile(0.5))


class EmpiricalModel(MarginalModel):
    """Linear interpolation of mid-rank plotting positions.

    The sample minimum and maximum sit at ``eps = 1/(2N)`` and ``1 - eps``
    (without ties).  Beyond them the CDF decays exponentially with scale
    ``span_lower`` / ``span_upper``.
    """

    kind = "empirical"

    def __init__(self, values, probs, n, span_lower, span_upper):
        self.values = np.asarray(values, dtype=float)
        self.probs = np.asarray(probs, dtype=float)
        self.n = int(n)
        self.span_lower = float(span_lower)
        self.span_upper = float(span_upper)

    @classmethod
    def fit(cls, sample, tail_span=None):
        sample = np.asarray(sample, dtype=float)
        if sample.size < 2 or np.ptp(sample) == 0:
            raise DegenerateSample("empirical model needs a non-constant sample")
        values, probs = _knots(sample)
        if tail_span is None:
            k = min(5, values.size - 1)
            span_lower = (values[k] - values[0]) / k
            span_upper = (values[-1] - values[-1 - k]) / k
        else:
            span_lower = span_upper = float(tail_span)
        return cls(values, probs, sample.size, span_lower, span_upper)

    @property
    def eps(self):
        return 0.5 / self.n

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        v, p = self.values, self.probs
        out = np.interp(x, v, p)
        lo = x < v[0]
        hi = x > v[-1]
        if lo.any():
            out = np.where(lo, p[0] * np.exp((x - v[0]) / self.span_lower), out)
        if hi.any():
            out = np.where(hi, 1 - (1 - p[-1])
                           * np.exp(-(x - v[-1]) / self.span_upper), out)
        return _clip_prob(out)

    def quantile(self, u):
        u = _clip_prob(np.asarray(u, dtype=float))
        v, p = self.values, self.probs
        out = np.interp(u, p, v)
        lo = u < p[0]
        hi = u > p[-1]
        if lo.any():
            out = np.where(lo, v[0] + self.span_lower * np.log(u / p[0]), out)
        if hi.any():
            out = np.where(hi, v[-1] - self.span_upper
                           * np.log((1 - u) / (1 - p[-1])), out)
        return out

    def to_dict(self):
        return {"kind": self.kind, "values": self.values.tolist(),
                "probs": self.probs.tolist(), "n": self.n,
                "span_lower": self.span_lower, "span_upper": self.span_upper}

    @classmethod
    def from_dict(cls, d):
        return cls(d["values"], d["probs"], d["n"], d["span_lower"],
                   d["span_upper"])


class GpdTailModel(MarginalModel):
    """Empirical body between two thresholds, GPD exceedances outside.

    Above ``upper_threshold`` the CDF is
    ``1 - upper_fraction * (1 + xi z / beta)^(-1/xi)`` with ``z`` the
    exceedance; the lower tail mirrors it.
    """

    kind = "gpd"

    def __init__(self, lower_threshold, upper_threshold, lower_xi, lower_beta,
                 upper_xi, upper_beta, body_values, body_probs,
                 lower_fraction, upper_fraction, n, methods=("mle", "mle")):
        self.lower_threshold = float(lower_threshold)
        self.upper_threshold = float(upper_threshold)
        self.lower_xi = float(lower_xi)
        self.lower_beta = float(lower_beta)
        self.upper_xi = float(upper_xi)
        self.upper_beta = float(upper_beta)
        self.body_values = np.asarray(body_values, dtype=float)
        self.body_probs = np.asarray(body_probs, dtype=float)
        self.lower_fraction = float(lower_fraction)
        self.upper_fraction = float(upper_fraction)
        self.n = int(n)
        self.methods = tuple(methods)

    @property
    def tail_fractions(self):
        return self.lower_fraction, self.upper_fraction

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.body_values, self.body_probs)
        lo = x < self.lower_threshold
        hi = x > self.upper_threshold
        if lo.any():
            z = np.where(lo, self.lower_threshold - x, 0.0)
            out = np.where(lo, self.lower_fraction
                           * gpd_survival(z, self.lower_xi, self.lower_beta),
                           out)
        if hi.any():
            z = np.where(hi, x - self.upper_threshold, 0.0)
            out = np.where(hi, 1.0 - self.upper_fraction
                           * gpd_survival(z, self.upper_xi, self.upper_beta),
                           out)
        return _clip_prob(out)

    def quantile(self, u):
        u = _clip_prob(np.asarray(u, dtype=float))
        out = np.interp(u, self.body_probs, self.body_values)
        lo = u < self.lower_fraction
        hi = u > 1.0 - self.upper_fraction
        if lo.any():
            s = np.where(lo, u / self.lower_fraction, 1.0)
            out = np.where(lo, self.lower_threshold - gpd_inverse_survival(
                s, self.lower_xi, self.lower_beta), out)
        if hi.any():
            s = np.where(hi, (1.0 - u) / self.upper_fraction, 1.0)
            out = np.where(hi, self.upper_threshold + gpd_inverse_survival(
                s, self.upper_xi, self.upper_beta), out)
        return out

    def to_dict(self):
        d = {k: getattr(self, k) for k in (
            "lower_threshold", "upper_threshold", "lower_xi", "lower_beta",
            "upper_xi", "upper_beta", "lower_fraction", "upper_fraction",
            "n")}
        d.update(kind=self.kind, body_values=self.body_values.tolist(),
                 body_probs=self.body_probs.tolist(),
                 methods=list(self.methods))
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("kind")
        return cls(**d)


class NormalModel(MarginalModel):
    kind = "normal"

    def __init__(self, mean, std):
        self.mean = float(mean)
        self.std = float(std)

    @classmethod
    def fit(cls, sample):
        sample = np.asarray(sample, dtype=float)
        std = sample.std(ddof=1) if sample.size > 1 else 0.0
        if not std > 0:
            raise DegenerateSample("normal fit needs a non-constant sample")
        return cls(sample.mean(), std)

    def cdf(self, x):
        return _clip_prob(ndtr((np.asarray(x, dtype=float) - self.mean)
                               / self.std))

    def quantile(self, u):
        return self.mean + self.std * ndtri(_clip_prob(np.asarray(u, float)))

    def to_dict(self):
        return {"kind": self.kind, "mean": self.mean, "std": self.std}

    @classmethod
    def from_dict(cls, d):
        return cls(d["mean"], d["std"])


class PointMassModel(MarginalModel):
    """Degenerate law of a constant series; Gaussianizes to zero."""

    kind = "point"

    def __init__(self, value):
        self.value = float(value)

    def cdf(self, x):
        return np.full(np.shape(x), 0.5)

    def quantile(self, u):
        return np.full(np.shape(u), self.value)

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}

    @classmethod
    def from_dict(cls, d):
        return cls(d["value"])


def fit_gpd_tails(sample, tail_fraction=0.15, min_sample=MIN_GPD_SAMPLE):
    """Fit an empirical body with GPD tails beyond the ``tail_fraction``
    quantiles on each side.

    Samples shorter than ``min_sample`` get an :class:`EmpiricalModel`
    instead (with a :class:`FallbackWarning`), as does any tail whose GPD
    estimation breaks down.

    Raises
    ------
    DegenerateSample
        If ``sample`` is constant.
    """
    if not 0.0 < tail_fraction < 0.5:
        raise ValueError("tail_fraction must lie in (0, 0.5)")
    sample = np.asarray(sample, dtype=float)
    if sample.size == 0 or np.ptp(sample) == 0:
        raise DegenerateSample("constant sample")
    if sample.size < min_sample:
        warnings.warn(f"{sample.size} observations, fitting empirical "
                      "marginal instead of GPD tails", FallbackWarning,
                      stacklevel=2)
        return EmpiricalModel.fit(sample)

    values, probs = _knots(sample)
    lo_p, hi_p = tail_fraction, 1.0 - tail_fraction
    lt = float(np.interp(lo_p, probs, values))
    ut = float(np.interp(hi_p, probs, values))
    inside = (values > lt) & (values < ut)
    body_values = np.concatenate([[lt], values[inside], [ut]])
    body_probs = np.concatenate([[lo_p], probs[inside], [hi_p]])

    try:
        lxi, lbeta, lmeth = fit_gpd(lt - sample[sample < lt])
        uxi, ubeta, umeth = fit_gpd(sample[sample > ut] - ut)
    except DegenerateSample:
        warnings.warn("GPD tail fit failed, using empirical marginal",
                      FallbackWarning, stacklevel=2)
        return EmpiricalModel.fit(sample)
    for side, xi in (("lower", lxi), ("upper", uxi)):
        if xi >= 0.5:
            warnings.warn(f"{side} tail shape {xi:.2f} >= 0.5: infinite "
                          "variance", HeavyTailWarning, stacklevel=2)
    return GpdTailModel(lt, ut, lxi, lbeta, uxi, ubeta, body_values,
                        body_probs, lo_p, tail_fraction, sample.size,
                        (lmeth, umeth))


def fit_empirical(sample, tail_span=None):
    return EmpiricalModel.fit(sample, tail_span=tail_span)


def fit_normal(sample):
    return NormalModel.fit(sample)


def to_gaussian(x, model):
    """Map deviations to standard-normal scores ``ndtri(cdf(x))``."""
    return ndtri(model.cdf(x))


def from_gaussian(z, model):
    """Inverse of :func:`to_gaussian`."""
    return model.quantile(ndtr(np.asarray(z, dtype=float)))


# -- forecast-conditional deviations ----------------------------------------

class BinnedConditionalModel:
    """Deviation distributions conditional on the forecast level.

    ``edges`` holds the ``B - 1`` interior cut points; a forecast ``f`` falls
    in bin ``searchsorted(edges, f)``, so values outside the fitted range use
    the first or last bin.
    """

    kind = "binned"

    def __init__(self, edges, models, counts, forecast_range):
        self.edges = np.asarray(edges, dtype=float)
        self.models = list(models)
        self.counts = list(counts)
        self.forecast_range = tuple(float(v) for v in forecast_range)

    @property
    def num_bins(self):
        return len(self.models)

    def bin_of(self, forecast):
        return np.searchsorted(self.edges, np.asarray(forecast, dtype=float),
                               side="right")

    def to_dict(self):
        return {"kind": self.kind, "edges": self.edges.tolist(),
                "models": [m.to_dict() for m in self.models],
                "counts": self.counts,
                "forecast_range": list(self.forecast_range)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["edges"], [model_from_dict(m) for m in d["models"]],
                   d["counts"], d["forecast_range"])


def fit_conditional_bins(forecasts, deviations, num_bins=10,
                         min_bin_count=20, tail_span=None):
    """Group (forecast, deviation) pairs into equal-count forecast bins and
    fit an empirical deviation law in each.

    The bin count drops automatically until every bin holds at least
    ``min_bin_count`` pairs.
    """
    f = np.asarray(forecasts, dtype=float).ravel()
    e = np.asarray(deviations, dtype=float).ravel()
    if f.shape != e.shape:
        raise ValueError("forecasts and deviations must pair up")
    bins = max(1, min(int(num_bins), f.size // max(1, int(min_bin_count))))
    if bins < num_bins:
        logger.info("reducing forecast bins from %d to %d (%d pairs)",
                    num_bins, bins, f.size)
    order = np.argsort(f, kind="stable")
    chunks = np.array_split(order, bins)
    edges = [0.5 * (f[chunks[i][-1]] + f[chunks[i + 1][0]])
             for i in range(bins - 1)]
    models = []
    for idx in chunks:
        chunk = e[idx]
        if np.ptp(chunk) == 0:
            models.append(PointMassModel(chunk[0]))
        else:
            models.append(EmpiricalModel.fit(chunk, tail_span=tail_span))
    return BinnedConditionalModel(edges, models, [len(c) for c in chunks],
                                  (f.min(), f.max()))


def conditional_sample_value(model, forecast, u):
    """Deviation at probability ``u`` for the bin holding ``forecast``."""
    forecast = np.asarray(forecast, dtype=float)
    u = np.asarray(u, dtype=float)
    forecast, u = np.broadcast_arrays(forecast, u)
    bins = model.bin_of(forecast)
    out = np.empty(u.shape)
    for b in np.unique(bins):
        sel = bins == b
        out[sel] = model.models[b].quantile(u[sel])
    return out


_KINDS = {cls.kind: cls for cls in (EmpiricalModel, GpdTailModel, NormalModel,
                                    PointMassModel, BinnedConditionalModel)}


def model_from_dict(d):
    try:
        return _KINDS[d["kind"]].from_dict(d)
    except KeyError:
        raise ValueError(f"unknown marginal kind {d.get('kind')!r}") from None


# -- per (unit, lag) grids ---------------------------------------------------

def fit_marginal_grid(devs, kind="empirical", tail_fraction=0.15,
                      tail_span=None):
    """Fit one marginal per (unit, lag) of a ``(p, q, N)`` deviation array.

    Constant series always get a :class:`PointMassModel`.
    """
    p, q, _ = devs.shape
    grid = []
    for u in range(p):
        row = []
        for lag in range(q):
            x = devs[u, lag]
            if np.ptp(x) == 0:
                row.append(PointMassModel(x[0]))
            elif kind == "gpd":
                row.append(fit_gpd_tails(x, tail_fraction))
            elif kind == "empirical":
                row.append(EmpiricalModel.fit(x, tail_span=tail_span))
            elif kind == "normal":
                row.append(NormalModel.fit(x))
            else:
                raise ValueError(f"unknown marginal kind {kind!r}")
        grid.append(row)
    return grid


def gaussianize_grid(values, grid):
    """Apply :func:`to_gaussian` cellwise; ``values`` is ``(p, q, ...)``."""
    out = np.empty(values.shape, dtype=float)
    for u, row in enumerate(grid):
        for lag, model in enumerate(row):
            out[u, lag] = to_gaussian(values[u, lag], model)
    return out


def degaussianize_grid(z, grid):
    """Inverse of :func:`gaussianize_grid`; ``z`` is ``(..., p, q)``."""
    out = np.empty(z.shape, dtype=float)
    for u, row in enumerate(grid):
        for lag, model in enumerate(row):
            out[..., u, lag] = from_gaussian(z[..., u, lag], model)
    return out
