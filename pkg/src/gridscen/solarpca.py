"""Principal-component representation of daily solar deviation curves.

Gaussianized 24-hour curves of all solar assets are pooled, a PCA basis is
fitted to the pooled 24 x 24 covariance and the curves are summarised by their
first ``k`` standardized component scores.  Night hours carry no variance, so
they receive no weight in the retained loadings and reconstruct to the pooled
centre (zero), which keeps simulated curves dark outside daylight.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import RankDeficientWarning
from .precision import SeparableGaussianModel, gemini

logger = logging.getLogger(__name__)

RANK_TOL = 1e-12


def fit_pca(pool):
    """Eigendecomposition of the pooled covariance.

    Parameters
    ----------
    pool : ndarray, shape (M, 24)
        One row per (asset, day) curve.

    Returns
    -------
    center : ndarray, shape (24,)
    loadings : ndarray, shape (24, 24)
        Orthonormal columns ordered by decreasing variance; each column's
        largest-magnitude entry is positive.
    explained : ndarray, shape (24,)
        Component variances (1/M scaling), nonincreasing.
    """
    pool = np.asarray(pool, dtype=float)
    if pool.ndim != 2 or pool.shape[0] < pool.shape[1]:
        raise ValueError(f"need at least {pool.shape[-1]} rows, got "
                         f"{pool.shape[0]}")
    center = pool.mean(axis=0)
    X = pool - center
    cov = X.T @ X / X.shape[0]
    vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    order = np.argsort(vals, kind="stable")[::-1]
    vals, vecs = vals[order], vecs[:, order]
    pivot = np.argmax(np.abs(vecs), axis=0)
    vecs = vecs * np.sign(vecs[pivot, np.arange(vecs.shape[1])])
    explained = np.clip(vals, 0.0, None)
    n_null = int(np.sum(explained < RANK_TOL * max(explained[0], 1.0)))
    if n_null:
        warnings.warn(f"{n_null} of {len(explained)} components carry no "
                      "variance", RankDeficientWarning, stacklevel=2)
    return center, vecs, explained


def choose_k(explained, threshold=0.95):
    """Smallest ``k`` whose cumulative explained fraction reaches ``threshold``."""
    explained = np.asarray(explained, dtype=float)
    total = explained.sum()
    if total <= 0:
        return 1
    frac = np.cumsum(explained) / total
    # guard the comparison against rounding in the cumulative sum
    k = int(np.searchsorted(frac, threshold - 1e-12, side="left")) + 1
    return min(max(k, 1), len(explained))


@dataclass
class SolarPcaModel:
    center: np.ndarray
    loadings: np.ndarray
    explained: np.ndarray
    k: int
    score_mean: np.ndarray
    score_std: np.ndarray
    separable: SeparableGaussianModel | None = None

    def __post_init__(self):
        if not 1 <= self.k <= self.loadings.shape[1]:
            raise ValueError(f"k={self.k} outside 1..{self.loadings.shape[1]}")

    @property
    def basis(self):
        return self.loadings[:, :self.k]

    def project(self, curves):
        """Standardized scores, shape ``(..., k)``, of ``(..., 24)`` curves."""
        raw = (np.asarray(curves, dtype=float) - self.center) @ self.basis
        return (raw - self.score_mean) / self.score_std

    def reconstruct(self, scores):
        """Curves, shape ``(..., 24)``, from standardized scores."""
        raw = np.asarray(scores, dtype=float) * self.score_std + self.score_mean
        return raw @ self.basis.T + self.center

    def sum_weights(self, lags):
        """Linear map from standardized scores to the sum over ``lags``.

        Returns ``(w, offset)`` with ``reconstruct(s)[lags].sum() == s @ w +
        offset``.
        """
        h = np.zeros(self.loadings.shape[0])
        h[list(lags)] = 1.0
        proj = self.basis.T @ h
        return self.score_std * proj, float(self.center @ h
                                           + self.score_mean @ proj)

    def to_dict(self):
        return {"kind": "solar_pca", "center": self.center.tolist(),
                "loadings": self.loadings.tolist(),
                "explained": self.explained.tolist(), "k": self.k,
                "score_mean": self.score_mean.tolist(),
                "score_std": self.score_std.tolist(),
                "separable": (self.separable.to_dict()
                              if self.separable is not None else None)}

    @classmethod
    def from_dict(cls, d):
        sep = d.get("separable")
        return cls(np.array(d["center"]), np.array(d["loadings"]),
                   np.array(d["explained"]), int(d["k"]),
                   np.array(d["score_mean"]), np.array(d["score_std"]),
                   SeparableGaussianModel.from_dict(sep) if sep else None)


def fit_basis(pool, threshold=0.95, k=None):
    """Fit the PCA basis and per-component score statistics (no dependence
    model)."""
    center, loadings, explained = fit_pca(pool)
    if k is None:
        k = choose_k(explained, threshold)
    raw = (np.asarray(pool, dtype=float) - center) @ loadings[:, :k]
    mean = raw.mean(axis=0)
    std = raw.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return SolarPcaModel(center, loadings, explained, k, mean, std)


def fit_solar_pca(z, threshold=0.95, k=None, lam_row=None, lam_col=None,
                  units=(), **kw):
    """Fit the full solar representation.

    Parameters
    ----------
    z : ndarray, shape (p, 24, N)
        Gaussianized deviations per (asset, lag, day); night lags are 0.
    threshold : float
        Cumulative explained-variance fraction used to pick ``k``.
    lam_row, lam_col
        Penalties passed to :func:`gemini` for the asset and component
        factors (``None`` selects by extended BIC).

    Returns
    -------
    SolarPcaModel
        With ``separable`` fitted over (asset x component) score matrices.
    """
    z = np.asarray(z, dtype=float)
    p, q, n = z.shape
    pool = z.transpose(0, 2, 1).reshape(p * n, q)
    model = fit_basis(pool, threshold, k)
    scores = model.project(z.transpose(2, 0, 1))  # (N, p, k)
    model.separable = gemini(scores, lam_row, lam_col, unit_order=units,
                             lag_order=tuple(range(model.k)), **kw)
    logger.info("solar PCA: k=%d explains %.3f of pooled variance", model.k,
                model.explained[:model.k].sum() / max(model.explained.sum(),
                                                      1e-300))
    return model
