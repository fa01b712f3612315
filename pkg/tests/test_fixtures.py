import json
from dataclasses import replace

import jsonschema
import numpy as np
import pandas as pd
import pytest

from gridscen.fixtures import (FixtureSpec, daylight_shape, generate_fixture,
                               spliced_quantile, truth_schema)
from gridscen.ingest import compute_deviations, read_series_csv
from gridscen.marginals import gpd_inverse_survival

SMALL = FixtureSpec(n_zones=3, n_wind=4, n_solar=5, n_days=30, seed=5)


def test_default_dimensions(default_fixture):
    fx = default_fixture
    assert len(fx.zones) == 8
    assert fx.actual["load"].shape == (8, 24, 730)
    assert fx.actual["wind"].shape == (20, 24, 730)
    assert fx.actual["solar"].shape == (30, 24, 730)
    assert (fx.catalog["quantity"] == "wind").sum() == 20
    assert (fx.catalog["quantity"] == "solar").sum() == 30


def test_same_seed_identical():
    a, b = generate_fixture(SMALL), generate_fixture(SMALL)
    for q in a.actual:
        assert np.array_equal(a.actual[q], b.actual[q])
        assert np.array_equal(a.forecast[q], b.forecast[q])
    pd.testing.assert_frame_equal(a.catalog, b.catalog)
    assert a.truth == b.truth


def test_other_seed_differs():
    a = generate_fixture(SMALL)
    b = generate_fixture(replace(SMALL, seed=6))
    assert not np.array_equal(a.actual["load"], b.actual["load"])


def test_truth_validates(default_fixture):
    jsonschema.validate(default_fixture.truth, truth_schema())


def test_truth_schema_rejects_missing_key(default_fixture):
    bad = json.loads(json.dumps(default_fixture.truth))
    del bad["load"]["xi"]
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(bad, truth_schema())


def test_truth_edges_are_chains(default_fixture):
    t = default_fixture.truth["load"]
    assert t["spatial_edges"] == [[i, i + 1] for i in range(7)]
    assert t["temporal_edges"] == [[i, i + 1] for i in range(23)]


def test_capacity_bounds(default_fixture):
    fx = default_fixture
    for q in ("wind", "solar"):
        cap = fx.catalog.loc[fx.catalog["quantity"] == q,
                             "capacity_mw"].to_numpy()[:, None, None]
        assert fx.actual[q].min() >= 0 and np.all(fx.actual[q] <= cap)
        assert fx.forecast[q].min() >= 0 and np.all(fx.forecast[q] <= cap)


def test_solar_dark_outside_daylight(default_fixture):
    fx = default_fixture
    night = [h for h in range(24) if h < 7 or h > 19]
    assert np.all(fx.actual["solar"][:, night, :] == 0)
    assert np.all(fx.actual["solar"][:, 7:20, :] > 0)


def test_daylight_shape_support():
    s = daylight_shape(7, 19)
    assert np.all(s[7:20] > 0) and np.all(s[:7] == 0) and np.all(s[20:] == 0)


def test_spliced_quantile_body_and_tails():
    u = np.array([0.15, 0.5, 0.85])
    np.testing.assert_allclose(spliced_quantile(u, 0.2), [-1, 0, 1],
                               atol=1e-12)
    beta = 2 * 0.15 / 0.7
    # tail beyond the body is GPD(xi, beta) at survival (1 - u) / 0.15
    u = 0.99
    expect = 1 + gpd_inverse_survival((1 - u) / 0.15, 0.2, beta)
    assert spliced_quantile(np.array([u]), 0.2)[0] == pytest.approx(expect)
    assert spliced_quantile(np.array([1 - u]), 0.2)[0] == pytest.approx(-expect)


def test_spliced_quantile_monotone():
    u = np.linspace(1e-6, 1 - 1e-6, 10001)
    assert np.all(np.diff(spliced_quantile(u, 0.3)) > 0)


def test_wind_spread_grows_with_forecast(default_fixture):
    fx = default_fixture
    fc = fx.forecast["wind"]
    cap = fx.catalog.loc[fx.catalog["quantity"] == "wind",
                         "capacity_mw"].to_numpy()[:, None, None]
    frac = fc / cap
    dev = (fx.actual["wind"] - fc) / cap
    lo = dev[(frac > 0.2) & (frac < 0.35)]
    hi = dev[(frac > 0.5) & (frac < 0.65)]
    assert hi.std() > 1.3 * lo.std()


def test_planted_zone_correlation(default_fixture):
    # daylight sums: load and solar of the planted zone co-move, others not
    fx = default_fixture
    day = slice(7, 20)
    load = (fx.actual["load"] - fx.forecast["load"])[:, day, :].sum(axis=1)
    sol = fx.actual["solar"] - fx.forecast["solar"]
    zone = fx.catalog.loc[fx.catalog["quantity"] == "solar", "zone_id"]
    z1 = sol[(zone == "Z1").to_numpy()][:, day, :].sum(axis=(0, 1))
    z2 = sol[(zone == "Z2").to_numpy()][:, day, :].sum(axis=(0, 1))
    assert np.corrcoef(load[0], z1)[0, 1] > 0.3
    assert abs(np.corrcoef(load[0], z2)[0, 1]) < 0.15


def test_write_round_trip(tmp_path):
    fx = generate_fixture(SMALL)
    fx.write(tmp_path)
    names = {p.name for p in tmp_path.iterdir()}
    assert {"catalog.csv", "truth.json", "load_actual.csv",
            "wind_forecast.csv", "solar_actual.csv"} <= names
    act = read_series_csv(tmp_path / "wind_actual.csv")
    fc = read_series_csv(tmp_path / "wind_forecast.csv")
    panel = compute_deviations(act, fc, fx.units("wind"))
    ref = fx.panel("wind")
    assert panel.days == ref.days
    np.testing.assert_allclose(panel.deviations, ref.deviations, atol=2e-6)
    jsonschema.validate(json.loads((tmp_path / "truth.json").read_text()),
                        truth_schema())


def test_tail_scale_option():
    fx = generate_fixture(replace(SMALL, load_xi=0.15, load_tail_scale=1.0))
    assert fx.truth["load"]["beta"] == 1.0
    base = generate_fixture(SMALL)
    assert base.truth["load"]["beta"] == pytest.approx(0.3 / 0.7)
    # same latent draws, longer tails
    assert (np.abs(fx.actual["load"] - fx.forecast["load"]).max()
            > np.abs(base.actual["load"] - base.forecast["load"]).max())
