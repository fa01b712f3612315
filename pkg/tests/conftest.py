import datetime as dt
import warnings

import pytest

from gridscen.engine import AssetCatalog, FitOptions, fit_for_day
from gridscen.fixtures import FixtureSpec, generate_fixture

TARGET = dt.date(2018, 7, 1)
# joint penalty near sqrt(2 ln(24^2) / 151), the universal threshold for the
# 151-day window of 24 aggregate nodes
JOINT_LAM = 0.3


def catalog_of(fx):
    return AssetCatalog.from_frame(fx.catalog, fx.zones)


def fit_quiet(panels, catalog, day=TARGET, **opts):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fit_for_day(panels, catalog, day, options=FitOptions(**opts))


@pytest.fixture(scope="session")
def default_fixture():
    return generate_fixture(FixtureSpec())


@pytest.fixture(scope="session")
def default_catalog(default_fixture):
    return catalog_of(default_fixture)


@pytest.fixture(scope="session")
def fitted(default_fixture, default_catalog):
    return fit_quiet(default_fixture.panels(), default_catalog,
                     joint_lam=JOINT_LAM)
