"""Sparse precision estimation: graphical lasso with an elementwise penalty,
the separable (Kronecker) row/column estimator, penalty construction and
dependency-graph export.

The graphical lasso maximizes::

    log det(Theta) - tr(S Theta) - sum_ij Lambda_ij |Theta_ij|

by block coordinate descent over the rows/columns of ``Theta``.  Each block
update solves the box-constrained quadratic program dual to a lasso
regression (Mazumder & Hastie's primal form of the glasso recursion), which
keeps every iterate positive definite and the objective nondecreasing.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from .errors import (ConvergenceWarning, FallbackWarning, MissingCoordinates,
                     NonPSDInput, NotConverged, ZeroVariance)

logger = logging.getLogger(__name__)

DEFAULT_GRID = (0.01, 0.05, 0.1, 0.2)


@njit(cache=True)
def _block_sweep(theta, S, lam, gamma, inner_tol, inner_max):
    """One pass over all rows/columns; updates ``theta`` and ``gamma`` in place."""
    p = S.shape[0]
    u = np.empty(p)
    v = np.empty(p)
    for j in range(p):
        # v = Theta_11 (s_12 + gamma_12), skipping index j throughout
        for k in range(p):
            u[k] = S[k, j] + gamma[k, j] if k != j else 0.0
        for k in range(p):
            if k == j:
                v[k] = 0.0
                continue
            acc = 0.0
            for l in range(p):
                if l != j:
                    acc += theta[k, l] * u[l]
            v[k] = acc
        for _ in range(inner_max):
            delta_max = 0.0
            for k in range(p):
                if k == j:
                    continue
                a = theta[k, k]
                rest = v[k] - a * u[k]
                g_new = -rest / a - S[k, j]
                bound = lam[k, j]
                if g_new > bound:
                    g_new = bound
                elif g_new < -bound:
                    g_new = -bound
                delta = g_new - gamma[k, j]
                if delta != 0.0:
                    gamma[k, j] = g_new
                    u[k] += delta
                    for l in range(p):
                        if l != j:
                            v[l] += theta[l, k] * delta
                    if abs(delta) > delta_max:
                        delta_max = abs(delta)
            if delta_max <= inner_tol:
                break
        w22 = S[j, j] + lam[j, j]
        quad = 0.0
        for k in range(p):
            if k == j:
                continue
            t = -v[k] / w22
            if lam[k, j] > 0.0 and abs(gamma[k, j]) < lam[k, j]:
                t = 0.0
            theta[k, j] = t
            theta[j, k] = t
            quad += u[k] * t
        theta[j, j] = (1.0 - quad) / w22


def penalized_loglik(S, lam, theta):
    """``log det Theta - tr(S Theta) - sum Lambda |Theta|``."""
    sign, logdet = np.linalg.slogdet(theta)
    if sign <= 0:
        return -np.inf
    return logdet - np.sum(S * theta) - np.sum(lam * np.abs(theta))


def kkt_residual(S, lam, theta, sigma=None):
    """Largest violation of the glasso stationarity conditions.

    Off the diagonal, ``|sigma - S| <= Lambda`` where ``theta`` vanishes and
    ``sigma - S = Lambda * sign(theta)`` elsewhere; on the diagonal
    ``sigma = S + Lambda``.
    """
    if sigma is None:
        sigma = np.linalg.inv(theta)
    diff = sigma - S
    p = S.shape[0]
    off = ~np.eye(p, dtype=bool)
    nz = (theta != 0) & off
    zero = (theta == 0) & off
    res = np.abs(np.diag(diff) - np.diag(lam))
    worst = res.max() if p else 0.0
    if nz.any():
        worst = max(worst, np.abs(diff[nz] - lam[nz] * np.sign(theta[nz])).max())
    if zero.any():
        worst = max(worst, np.maximum(np.abs(diff[zero]) - lam[zero], 0).max())
    return float(worst)


@dataclass
class PrecisionEstimate:
    theta: np.ndarray
    sigma: np.ndarray
    objective: list = field(default_factory=list)
    converged: bool = True
    n_iter: int = 0
    kkt: float = 0.0
    penalty: float | None = None
    jitter: float = 0.0

    @property
    def p(self):
        return self.theta.shape[0]

    def partial_correlation(self):
        d = np.sqrt(np.diag(self.theta))
        pc = -self.theta / np.outer(d, d)
        np.fill_diagonal(pc, 1.0)
        return pc

    def normalized(self):
        """Rescale so that ``sigma`` has unit diagonal."""
        d = np.sqrt(np.diag(self.sigma))
        sigma = self.sigma / np.outer(d, d)
        np.fill_diagonal(sigma, 1.0)
        return PrecisionEstimate(self.theta * np.outer(d, d), sigma,
                                 list(self.objective), self.converged,
                                 self.n_iter, self.kkt, self.penalty,
                                 self.jitter)

    def to_dict(self):
        return {"theta": self.theta.tolist(), "sigma": self.sigma.tolist(),
                "objective": [float(v) for v in self.objective],
                "converged": bool(self.converged), "n_iter": self.n_iter,
                "kkt": self.kkt, "penalty": self.penalty,
                "jitter": self.jitter}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["theta"], dtype=float).reshape(
                       len(d["theta"]), -1),
                   np.array(d["sigma"], dtype=float).reshape(
                       len(d["sigma"]), -1),
                   list(d["objective"]), d["converged"], d["n_iter"],
                   d["kkt"], d["penalty"], d.get("jitter", 0.0))


def _as_penalty(lam, p):
    lam = np.asarray(lam, dtype=float)
    if lam.ndim == 0:
        mat = np.full((p, p), float(lam))
        np.fill_diagonal(mat, 0.0)
        return mat
    if lam.shape != (p, p):
        raise ValueError(f"penalty shape {lam.shape}, expected {(p, p)}")
    if not np.allclose(lam, lam.T) or (lam < 0).any():
        raise ValueError("penalty must be symmetric and nonnegative")
    return lam


def glasso(S, lam=0.0, tol=1e-12, max_iter=1000, theta_init=None,
           strict=False):
    """Graphical lasso with elementwise penalty.

    Parameters
    ----------
    S : ndarray, shape (p, p)
        Symmetric positive semidefinite (correlation) matrix.
    lam : float or ndarray
        Scalar penalty (broadcast to the off-diagonal) or a full symmetric
        ``(p, p)`` penalty matrix.
    tol : float
        Stop once the largest KKT violation (see :func:`kkt_residual`) is
        below ``tol``.
    max_iter : int
        Maximum number of full sweeps.
    theta_init : ndarray, optional
        Positive definite warm start.
    strict : bool
        Raise :class:`NotConverged` instead of warning after ``max_iter``.

    Returns
    -------
    PrecisionEstimate
        ``objective`` holds the penalized log-likelihood after each sweep.
    """
    S = np.array(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("S must be square")
    if np.abs(S - S.T).max(initial=0.0) > 1e-10 * max(1.0, np.abs(S).max()):
        raise ValueError("S must be symmetric")
    S = 0.5 * (S + S.T)
    p = S.shape[0]
    lam_m = _as_penalty(lam, p)

    eig = np.linalg.eigvalsh(S)
    scale = max(1.0, float(np.abs(np.diag(S)).max()))
    if eig[0] < -1e-8 * scale:
        raise NonPSDInput(f"smallest eigenvalue {eig[0]:.3g} < 0")
    jitter = 0.0
    if not lam_m.any() and eig[0] < 1e-10 * scale:
        jitter = 1e-10 * scale
        S = S + jitter * np.eye(p)
        warnings.warn("singular S with zero penalty: added diagonal jitter "
                      f"{jitter:.1e}", ConvergenceWarning, stacklevel=2)

    if theta_init is None:
        theta = np.diag(1.0 / (np.diag(S) + np.diag(lam_m)))
    else:
        theta = np.array(theta_init, dtype=float)
    gamma = np.zeros((p, p))
    trace = [penalized_loglik(S, lam_m, theta)]
    inner_tol = min(1e-12, tol * 1e-3)
    converged, kkt, sigma = False, np.inf, None
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        _block_sweep(theta, S, lam_m, gamma, inner_tol, 10000)
        sigma = np.linalg.inv(theta)
        sigma = 0.5 * (sigma + sigma.T)
        trace.append(penalized_loglik(S, lam_m, theta))
        kkt = kkt_residual(S, lam_m, theta, sigma)
        if kkt <= tol:
            converged = True
            break
    if not converged:
        msg = f"glasso stopped after {max_iter} sweeps (KKT {kkt:.2e})"
        if strict:
            raise NotConverged(msg)
        warnings.warn(msg, ConvergenceWarning, stacklevel=2)
    penalty = float(lam) if np.ndim(lam) == 0 else None
    return PrecisionEstimate(theta, sigma, trace, converged, n_iter, kkt,
                             penalty, jitter)


def sample_correlation(X, constant="raise"):
    """Correlation of the columns of an ``(N, p)`` data matrix (1/N scaling).

    ``constant="isolate"`` maps zero-variance columns to isolated nodes
    (unit diagonal, zero correlation) instead of raising ``ZeroVariance``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need an (N, p) matrix with N >= 2")
    Xc = X - X.mean(axis=0)
    sd = np.sqrt(np.mean(Xc ** 2, axis=0))
    bad = np.flatnonzero(~(sd > 0))
    if bad.size:
        if constant != "isolate":
            raise ZeroVariance(bad.tolist())
        warnings.warn(f"{bad.size} constant columns treated as independent",
                      FallbackWarning, stacklevel=2)
        sd = np.where(sd > 0, sd, 1.0)
        Xc[:, bad] = 0.0
    Z = Xc / sd
    S = Z.T @ Z / X.shape[0]
    np.fill_diagonal(S, 1.0)
    return 0.5 * (S + S.T)


def ebic(S, n, estimate, gamma=0.5):
    """Extended BIC of a fitted precision matrix (lower is better)."""
    theta = estimate.theta
    p = theta.shape[0]
    edges = int(np.count_nonzero(np.triu(theta, 1)))
    _, logdet = np.linalg.slogdet(theta)
    nll = n * (np.sum(S * theta) - logdet)
    return nll + edges * np.log(n) + 4.0 * gamma * edges * np.log(max(p, 2))


def select_penalty(S, n, grid=DEFAULT_GRID, base=None, gamma=0.5, **kw):
    """Fit ``glasso`` for each scale in ``grid`` and keep the EBIC minimizer.

    ``base`` is an optional penalty shape (e.g. :func:`distance_penalty` with
    unit scale); the penalty tried is ``scale * base``.  Ties go to the larger
    scale.
    """
    p = S.shape[0]
    if base is None:
        base = np.ones((p, p))
        np.fill_diagonal(base, 0.0)
    best, best_score = None, np.inf
    theta = None
    for scale in sorted(grid, reverse=True):
        est = glasso(S, scale * base, theta_init=theta, **kw)
        theta = est.theta
        score = ebic(S, n, est, gamma)
        if score < best_score - 1e-9 * abs(score):
            best, best_score = est, score
            best.penalty = float(scale)
    return best


def gram_correlation(G):
    """Turn a Gram matrix into a correlation matrix; null rows stay isolated."""
    d = np.sqrt(np.clip(np.diag(G), 0, None))
    d_safe = np.where(d > 0, d, 1.0)
    R = G / np.outer(d_safe, d_safe)
    R[d == 0, :] = 0.0
    R[:, d == 0] = 0.0
    np.fill_diagonal(R, 1.0)
    return 0.5 * (R + R.T)


@dataclass
class SeparableGaussianModel:
    """Kronecker model ``Sigma_spatial (x) Sigma_temporal`` of unit-diagonal
    factors; flattened index ``unit * q + lag``."""

    spatial: PrecisionEstimate
    temporal: PrecisionEstimate
    unit_order: tuple = ()
    lag_order: tuple = ()

    @property
    def shape(self):
        return self.spatial.p, self.temporal.p

    def covariance(self):
        return np.kron(self.spatial.sigma, self.temporal.sigma)

    def precision(self):
        return np.kron(self.spatial.theta, self.temporal.theta)

    def to_dict(self):
        return {"spatial": self.spatial.to_dict(),
                "temporal": self.temporal.to_dict(),
                "unit_order": list(self.unit_order),
                "lag_order": list(self.lag_order)}

    @classmethod
    def from_dict(cls, d):
        return cls(PrecisionEstimate.from_dict(d["spatial"]),
                   PrecisionEstimate.from_dict(d["temporal"]),
                   tuple(d["unit_order"]), tuple(d["lag_order"]))


def row_column_correlations(X):
    """Row and column correlation matrices of ``(N, p, q)`` matrix data.

    Each (row, column) cell is centred over the N observations first.
    """
    X = np.asarray(X, dtype=float)
    N, p, q = X.shape
    Xc = X - X.mean(axis=0)
    A = np.einsum("dik,djk->ij", Xc, Xc) / (N * q)
    B = np.einsum("dki,dkj->ij", Xc, Xc) / (N * p)
    return gram_correlation(A), gram_correlation(B)


def _fit_factor(R, n_eff, lam, base, grid, **kw):
    if R.shape[0] == 1:
        return PrecisionEstimate(np.ones((1, 1)), np.ones((1, 1)), [0.0],
                                 True, 0, 0.0, 0.0)
    if lam is None:
        return select_penalty(R, n_eff, grid=grid, base=base, **kw)
    lam = np.asarray(lam, dtype=float)
    if base is not None and lam.ndim == 0:
        return glasso(R, float(lam) * base, **kw)
    return glasso(R, lam, **kw)


def gemini(X, lam_row=None, lam_col=None, row_base=None, col_base=None,
           grid=DEFAULT_GRID, unit_order=(), lag_order=(), **kw):
    """Separable precision estimate for matrix-variate data.

    Parameters
    ----------
    X : ndarray, shape (N, p, q)
        N observations of p x q matrices (units x lags), Gaussianized.
    lam_row, lam_col : float, ndarray or None
        Penalties for the row (spatial) and column (temporal) factors.
        ``None`` selects a scale from ``grid`` by extended BIC, using
        ``N * q`` and ``N * p`` as sample sizes.
    row_base, col_base : ndarray, optional
        Penalty shapes multiplied by scalar ``lam_*`` or grid values.

    Returns
    -------
    SeparableGaussianModel
        Both factors normalized to unit diagonal.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 3 or X.shape[0] < 2:
        raise ValueError("X must be (N, p, q) with N >= 2")
    N, p, q = X.shape
    R_row, R_col = row_column_correlations(X)
    spatial = _fit_factor(R_row, N * q, lam_row, row_base, grid, **kw)
    temporal = _fit_factor(R_col, N * p, lam_col, col_base, grid, **kw)
    return SeparableGaussianModel(spatial.normalized(), temporal.normalized(),
                                  tuple(unit_order), tuple(lag_order))


def distance_penalty(locations, units, base=1.0):
    """Penalty proportional to Euclidean distance between units.

    ``Lambda_ij = base * dist(i, j) / mean_{i<j} dist``, zero diagonal.
    """
    try:
        xy = np.array([locations[u] for u in units], dtype=float)
    except KeyError as exc:
        raise MissingCoordinates(f"no coordinates for {exc.args[0]!r}") from None
    if xy.ndim != 2 or xy.shape[1] != 2:
        raise MissingCoordinates("coordinates must be (x, y) pairs")
    dist = np.sqrt(((xy[:, None, :] - xy[None, :, :]) ** 2).sum(-1))
    p = len(units)
    mean = dist[np.triu_indices(p, 1)].mean() if p > 1 else 0.0
    if mean == 0:
        return np.zeros((p, p))
    return base * dist / mean


@dataclass
class DependencyGraph:
    nodes: list
    edges: list  # (i, j, partial correlation), i < j

    def to_csv(self):
        lines = ["node_a,node_b,weight"]
        for i, j, w in self.edges:
            lines.append(f"{self.nodes[i]},{self.nodes[j]},{w:.6f}")
        return "\n".join(lines) + "\n"

    def to_dot(self, name="G"):
        lines = [f"graph {name} {{"]
        for node in self.nodes:
            lines.append(f'  "{node}";')
        for i, j, w in self.edges:
            lines.append(f'  "{self.nodes[i]}" -- "{self.nodes[j]}" '
                         f'[weight={abs(w):.6f}, label="{w:.3f}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def has_edge(self, a, b):
        ia, ib = self.nodes.index(a), self.nodes.index(b)
        key = (min(ia, ib), max(ia, ib))
        return any((i, j) == key for i, j, _ in self.edges)


def dependency_graph(estimate, labels: Sequence | None = None,
                     threshold=0.01):
    """Edges where the partial correlation exceeds ``threshold`` in size."""
    pc = estimate.partial_correlation()
    p = pc.shape[0]
    nodes = list(labels) if labels is not None else list(range(p))
    edges = [(i, j, float(pc[i, j])) for i in range(p) for j in range(i + 1, p)
             if abs(pc[i, j]) > threshold]
    return DependencyGraph(nodes, edges)
