"""Gaussian sampling: dense and Kronecker-structured draws and exact
conditioning on linear equality constraints.

Conditioning uses the pathwise update ``x + K (b - A x)`` with gain
``K = Sigma A^T (A Sigma A^T)^{-1}``: an unconditional draw ``x`` is mapped to
a draw from the conditional law, and ``A`` applied to the result equals ``b``
up to rounding.  For separable covariances and constraints of the form
``A = Z (x) H`` the gain factorizes, so nothing of size ``(pq)^2`` is built.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import FallbackWarning, NotPSD, SingularConstraint

logger = logging.getLogger(__name__)

PSD_FLOOR = 1e-10
RANK_TOL = 1e-10


def as_generator(seed) -> np.random.Generator:
    """Counter-based (Philox) generator from an int, SeedSequence or
    Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def spawn_generators(seed, n):
    """``n`` independent Philox streams derived from one seed."""
    return [as_generator(s) for s in np.random.SeedSequence(seed).spawn(n)]


def psd_factor(sigma, repair=False):
    """Lower factor ``L`` with ``L L^T = sigma``.

    Cholesky when it succeeds; otherwise, when ``repair`` is set, the
    eigenvalues are clipped at ``PSD_FLOOR`` first.
    """
    sigma = np.asarray(sigma, dtype=float)
    sigma = 0.5 * (sigma + sigma.T)
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        if not repair:
            raise NotPSD("covariance is not positive definite") from None
    vals, vecs = np.linalg.eigh(sigma)
    n_clip = int(np.sum(vals < PSD_FLOOR))
    warnings.warn(f"clipped {n_clip} eigenvalues to {PSD_FLOOR:g}",
                  FallbackWarning, stacklevel=3)
    fixed = (vecs * np.maximum(vals, PSD_FLOOR)) @ vecs.T
    return np.linalg.cholesky(0.5 * (fixed + fixed.T))


def sample_mvn(sigma, m, seed=None, repair=False):
    """``m`` mean-zero draws, shape ``(m, d)``, with covariance ``sigma``."""
    L = psd_factor(sigma, repair)
    rng = as_generator(seed)
    G = rng.standard_normal((m, L.shape[0]))
    return G @ L.T


def sample_kronecker(sigma_s, sigma_t, m, seed=None, repair=False,
                     flatten=True):
    """Draws with covariance ``sigma_s (x) sigma_t``.

    Each draw is ``L_S G L_T^T`` with ``G`` a ``p x q`` standard normal
    matrix.  With ``flatten`` the result is ``(m, p*q)`` in row-major
    ``unit * q + lag`` order, otherwise ``(m, p, q)``.
    """
    Ls = psd_factor(sigma_s, repair)
    Lt = psd_factor(sigma_t, repair)
    rng = as_generator(seed)
    p, q = Ls.shape[0], Lt.shape[0]
    G = rng.standard_normal((m, p, q))
    Z = Ls @ G @ Lt.T
    return Z.reshape(m, p * q) if flatten else Z


def independent_rows(A, tol=RANK_TOL):
    """Indices of a maximal set of linearly independent rows of ``A``.

    Greedy Gram-Schmidt in row order, so earlier rows win.
    """
    A = np.asarray(A, dtype=float)
    scale = max(np.abs(A).max(initial=0.0), 1.0)
    basis, keep = [], []
    for i, row in enumerate(A):
        r = row.copy()
        for v in basis:
            r -= (r @ v) * v
        norm = np.linalg.norm(r)
        if norm > tol * scale * max(1.0, np.linalg.norm(row)):
            basis.append(r / norm)
            keep.append(i)
    return keep


@dataclass(frozen=True)
class LinearConstraint:
    """``A x = b`` with ``A`` of shape ``(r, d)``; ``b`` may carry one row per
    scenario, shape ``(m, r)``."""

    A: np.ndarray
    b: np.ndarray

    def reduced(self, tol=RANK_TOL) -> "LinearConstraint":
        """Drop numerically dependent rows (with a warning)."""
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        keep = independent_rows(A, tol)
        if len(keep) < A.shape[0]:
            warnings.warn(f"dropped {A.shape[0] - len(keep)} dependent "
                          "constraint rows", FallbackWarning, stacklevel=2)
        b = np.asarray(self.b, dtype=float)
        return LinearConstraint(A[keep], b[..., keep])


def _gain(sigma, A):
    SAt = sigma @ A.T
    M = A @ SAt
    M = 0.5 * (M + M.T)
    try:
        c = np.linalg.cond(M)
    except np.linalg.LinAlgError:
        c = np.inf
    if not np.isfinite(c) or c > 1e12:
        raise SingularConstraint(f"A Sigma A^T is singular (cond {c:.3g})")
    return np.linalg.solve(M, SAt.T).T


def condition_on_linear(sigma, constraint):
    """Conditional mean and covariance of ``N(0, sigma)`` given ``A x = b``."""
    sigma = np.asarray(sigma, dtype=float)
    c = constraint.reduced()
    A = np.atleast_2d(c.A)
    K = _gain(sigma, A)
    mu = K @ np.asarray(c.b, dtype=float)
    sigma_c = sigma - K @ A @ sigma
    return mu, 0.5 * (sigma_c + sigma_c.T)


def sample_conditional(sigma, constraint, m, seed=None, repair=False):
    """``m`` draws from ``N(0, sigma)`` conditioned on ``A x = b``.

    ``constraint.b`` is either a single ``(r,)`` target or one per draw,
    shape ``(m, r)``.
    """
    sigma = np.asarray(sigma, dtype=float)
    c = constraint.reduced()
    A = np.atleast_2d(c.A)
    K = _gain(sigma, A)
    x = sample_mvn(sigma, m, seed, repair)
    resid = np.asarray(c.b, dtype=float) - x @ A.T
    return x + resid @ K.T


class KroneckerConditioner:
    """Exact conditioning of ``X ~ MN(0, sigma_s, sigma_t)`` on
    ``Z X H^T = B``.

    Parameters
    ----------
    sigma_s, sigma_t : ndarray
        Row (``p x p``) and column (``q x q``) covariance factors.
    Z : ndarray, shape (r_s, p)
    H : ndarray, shape (r_t, q)
        Row and column constraint maps; the flattened constraint matrix is
        ``Z (x) H``.
    """

    def __init__(self, sigma_s, sigma_t, Z, H):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        H = np.atleast_2d(np.asarray(H, dtype=float))
        self.Z, self.H = Z, H
        self.Ks = _gain(np.asarray(sigma_s, dtype=float), Z)
        self.Kt = _gain(np.asarray(sigma_t, dtype=float), H)

    def apply(self, X, B):
        """Map unconditional draws ``X`` (``(m, p, q)``) to conditional ones.

        ``B`` has shape ``(r_s, r_t)`` or ``(m, r_s, r_t)``.
        """
        resid = np.asarray(B, dtype=float) - self.Z @ X @ self.H.T
        return X + self.Ks @ resid @ self.Kt.T

    def residual(self, X, B):
        return self.Z @ X @ self.H.T - B
