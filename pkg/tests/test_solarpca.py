import warnings

import numpy as np
import pytest

from gridscen.errors import RankDeficientWarning
from gridscen.solarpca import (SolarPcaModel, choose_k, fit_basis, fit_pca,
                               fit_solar_pca)


def low_rank_pool(rank, rows, seed, night=()):
    rng = np.random.default_rng(seed)
    basis = rng.standard_normal((rank, 24))
    basis[:, list(night)] = 0.0
    return rng.standard_normal((rows, rank)) @ basis


class TestFitPca:
    def test_exact_low_rank(self):
        with pytest.warns(RankDeficientWarning):
            _, _, explained = fit_pca(low_rank_pool(2, 500, 0))
        assert np.all(explained[2:] <= 1e-10)
        assert explained[1] > 1e-3

    def test_isotropic_noise(self):
        X = np.random.default_rng(1).standard_normal((10000, 24))
        _, _, explained = fit_pca(X)
        assert explained.max() / explained.min() <= 1.1 / 0.9
        assert np.all(np.abs(explained / explained.mean() - 1) <= 0.1)

    def test_orthonormal_and_variance_bookkeeping(self):
        X = low_rank_pool(24, 2000, 2) + 0.3
        center, L, explained = fit_pca(X)
        np.testing.assert_allclose(L.T @ L, np.eye(24), atol=1e-10)
        assert np.all(np.diff(explained) <= 0)
        total = np.sum(np.var(X, axis=0))
        assert explained.sum() == pytest.approx(total, abs=1e-8 * total)
        np.testing.assert_allclose(center, X.mean(axis=0))

    def test_sign_convention(self):
        X = low_rank_pool(24, 300, 3)
        _, L, _ = fit_pca(X)
        _, L2, _ = fit_pca(-X)
        idx = np.argmax(np.abs(L), axis=0)
        assert np.all(L[idx, np.arange(24)] > 0)
        np.testing.assert_allclose(np.abs(L), np.abs(L2), atol=1e-8)

    def test_deterministic(self):
        X = low_rank_pool(24, 300, 4)
        a = fit_pca(X)[1]
        b = fit_pca(X.copy())[1]
        assert a.tobytes() == b.tobytes()

    def test_too_few_rows(self):
        with pytest.raises(ValueError):
            fit_pca(np.ones((10, 24)))


class TestChooseK:
    def test_single_component(self):
        assert choose_k([1.0] + [0.0] * 23) == 1

    def test_equal_variances(self):
        assert choose_k(np.ones(24), 0.95) == 23

    def test_rank_six(self):
        with pytest.warns(RankDeficientWarning):
            _, _, explained = fit_pca(low_rank_pool(6, 1000, 5))
        assert choose_k(explained, 0.95) <= 6

    def test_full_threshold(self):
        assert choose_k(np.arange(24, 0, -1.0), 1.0) == 24


class TestProjection:
    @pytest.fixture
    def model(self):
        X = low_rank_pool(24, 3000, 6) + np.linspace(0, 1, 24)
        return X, fit_basis(X, threshold=0.9)

    def test_scores_standardized(self, model):
        X, m = model
        s = m.project(X)
        np.testing.assert_allclose(s.mean(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(s.var(axis=0), 1.0, atol=1e-9)

    def test_center_projects_to_zero(self, model):
        _, m = model
        raw = (m.center - m.center) @ m.basis
        np.testing.assert_allclose(raw, 0.0)
        np.testing.assert_allclose(m.reconstruct(m.project(m.center)),
                                   m.center, atol=1e-9)

    def test_zero_scores_reconstruct_center(self, model):
        _, m = model
        zero = -m.score_mean / m.score_std
        np.testing.assert_allclose(m.reconstruct(zero), m.center, atol=1e-12)

    def test_round_trip_on_subspace(self, model):
        _, m = model
        s = np.random.default_rng(0).standard_normal((20, m.k))
        np.testing.assert_allclose(m.project(m.reconstruct(s)), s, atol=1e-9)

    def test_full_rank_reconstruction(self):
        X = low_rank_pool(24, 500, 7)
        m = fit_basis(X, k=24)
        np.testing.assert_allclose(m.reconstruct(m.project(X)), X, atol=1e-9)

    def test_energy_inequality(self, model):
        X, m = model
        centred = X[:50] - m.center
        raw = centred @ m.basis
        assert np.all((raw ** 2).sum(1) <= (centred ** 2).sum(1) + 1e-9)
        inside = m.reconstruct(m.project(X[:5])) - m.center
        np.testing.assert_allclose(((inside @ m.basis) ** 2).sum(1),
                                   (inside ** 2).sum(1), rtol=1e-9)

    def test_sum_weights(self, model):
        _, m = model
        s = np.random.default_rng(1).standard_normal((10, m.k))
        lags = range(6, 19)
        w, off = m.sum_weights(lags)
        np.testing.assert_allclose(m.reconstruct(s)[:, 6:19].sum(1),
                                   s @ w + off, atol=1e-10)


class TestSolarModel:
    def night_panel(self, p=5, n=200, seed=0):
        rng = np.random.default_rng(seed)
        day = np.arange(7, 20)
        shape = np.sin(np.pi * (day - 6.5) / 13)
        z = np.zeros((p, 24, n))
        common = rng.standard_normal((n, 3))
        for a in range(p):
            own = rng.standard_normal((n, 3))
            f = 0.7 * common + 0.7 * own
            curves = (f[:, :1] * shape + f[:, 1:2] * np.cos(day / 3.0)
                      + 0.5 * f[:, 2:] * (day - 13) / 6)
            z[a][day] = curves.T
        return z

    def test_night_hours_stay_zero(self):
        z = self.night_panel()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RankDeficientWarning)
            m = fit_solar_pca(z, threshold=0.95, lam_row=0.05, lam_col=0.05)
        assert m.k <= 3
        s = np.random.default_rng(0).standard_normal((100, m.k)) * 3
        rec = m.reconstruct(s)
        night = [h for h in range(24) if not 7 <= h <= 19]
        assert np.abs(rec[:, night]).max() <= 1e-8

    def test_separable_dimensions_and_serialization(self):
        z = self.night_panel(p=4)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RankDeficientWarning)
            m = fit_solar_pca(z, units=("a", "b", "c", "d"), lam_row=0.05,
                              lam_col=0.05)
        assert m.separable.shape == (4, m.k)
        back = SolarPcaModel.from_dict(m.to_dict())
        np.testing.assert_array_equal(back.loadings, m.loadings)
        assert back.k == m.k
        np.testing.assert_array_equal(back.separable.covariance(),
                                      m.separable.covariance())
