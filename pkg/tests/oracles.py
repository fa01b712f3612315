"""Independent reference implementations used by several test modules."""

import numpy as np
from scipy import stats


def penalized_objective(S, lam, theta):
    sign, logdet = np.linalg.slogdet(theta)
    if sign <= 0:
        return -np.inf
    return logdet - np.trace(S @ theta) - np.sum(lam * np.abs(theta))


def brute_force_glasso(S, lam, n_iter=20000, step0=1.0):
    """Proximal gradient ascent on the penalized log-likelihood.

    Shares no code with the package solver: a gradient step on
    ``log det - tr(S .)`` followed by soft thresholding, with backtracking
    that also keeps the iterate positive definite.
    """
    p = S.shape[0]
    if np.ndim(lam) == 0:
        lam = np.full((p, p), float(lam))
        np.fill_diagonal(lam, 0.0)
    theta = np.diag(1.0 / np.diag(S + lam))
    obj = penalized_objective(S, lam, theta)
    step = step0
    prev = None
    for _ in range(n_iter):
        grad = np.linalg.inv(theta) - S
        if prev is not None:
            # Barzilai-Borwein guess for the next step, still backtracked
            dx, dg = theta - prev[0], grad - prev[1]
            denom = -np.sum(dx * dg)
            if denom > 0:
                step = min(np.sum(dx * dx) / denom, step0 * 1e3)
        prev = (theta, grad)
        while True:
            cand = theta + step * grad
            cand = np.sign(cand) * np.maximum(np.abs(cand) - step * lam, 0.0)
            cand = 0.5 * (cand + cand.T)
            try:
                np.linalg.cholesky(cand)
            except np.linalg.LinAlgError:
                step *= 0.5
                continue
            new = penalized_objective(S, lam, cand)
            if new >= obj - 1e-15:
                break
            step *= 0.5
            if step < 1e-14:
                return theta, obj
        if new - obj < 1e-15 and np.abs(cand - theta).max() < 1e-11:
            theta, obj = cand, new
            break
        theta, obj = cand, new
    return theta, obj


def random_spd_correlation(p, rng, n_obs=None):
    """Sample correlation of ``n_obs`` draws with a random covariance."""
    n_obs = n_obs or 3 * p + 5
    A = rng.standard_normal((p, p))
    cov = A @ A.T + 0.5 * np.eye(p)
    X = rng.multivariate_normal(np.zeros(p), cov, size=n_obs)
    X = X - X.mean(axis=0)
    C = X.T @ X / n_obs
    d = np.sqrt(np.diag(C))
    return C / np.outer(d, d)


def tridiagonal(n, off):
    return np.eye(n) + off * (np.eye(n, k=1) + np.eye(n, k=-1))


def precision_to_correlation(theta):
    sigma = np.linalg.inv(theta)
    d = np.sqrt(np.diag(sigma))
    return sigma / np.outer(d, d)


def simulate_kronecker(sigma_s, sigma_t, n, seed):
    """Matrix-normal draws built from the explicitly formed Kronecker product."""
    rng = np.random.default_rng(seed)
    p, q = sigma_s.shape[0], sigma_t.shape[0]
    big = np.kron(sigma_s, sigma_t)
    return rng.multivariate_normal(np.zeros(p * q), big, size=n).reshape(n, p, q)


def gpd_tailed_sample(xi, beta, n_tail, rng, frac=0.15):
    """Uniform body on [-1, 1] with exact GPD exceedances beyond +-1."""
    n_body = int(round(n_tail * (1 - 2 * frac) / frac))
    up = 1 + stats.genpareto.rvs(xi, scale=beta, size=n_tail, random_state=rng)
    lo = -1 - stats.genpareto.rvs(xi, scale=beta, size=n_tail,
                                  random_state=rng)
    return np.concatenate([lo, rng.uniform(-1, 1, n_body), up])
