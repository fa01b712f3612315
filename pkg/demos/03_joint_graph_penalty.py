"""How the joint-graph penalty decides whether wind looks independent.

The joint model has 24 nodes (load, wind and solar daylight sums per zone)
but only about 150 days of history.  Pure sampling noise then produces
partial correlations near sqrt(2 ln(24^2) / 150) ~= 0.29, above the largest
value of the default penalty grid.
"""

import datetime as dt
import warnings

import numpy as np

from gridscen.engine import AssetCatalog, FitOptions, fit_for_day
from gridscen.fixtures import FixtureSpec, generate_fixture

TARGET = dt.date(2018, 7, 1)


def cross_edges(system):
    g = system.joint_graph()
    return [(g.nodes[i], g.nodes[j], w) for i, j, w in g.edges
            if g.nodes[i].startswith("wind:") != g.nodes[j].startswith("wind:")]


def main():
    print("noise level:", round(float(np.sqrt(2 * np.log(24 ** 2) / 151)), 3))
    print(f"{'seed':>4s} {'penalty':>8s} {'wind cross edges':>17s} "
          f"{'planted edge':>13s}")
    for seed in range(4):
        fx = generate_fixture(FixtureSpec(seed=seed))
        catalog = AssetCatalog.from_frame(fx.catalog, fx.zones)
        for joint_lam in (None, 0.3):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                system = fit_for_day(fx.panels(), catalog, TARGET,
                                     options=FitOptions(joint_lam=joint_lam))
            planted = system.joint_graph().has_edge("load:Z1", "solar:Z1")
            label = "EBIC" if joint_lam is None else f"{joint_lam}"
            print(f"{seed:4d} {label:>8s} {len(cross_edges(system)):17d} "
                  f"{str(planted):>13s}")


if __name__ == "__main__":
    main()
