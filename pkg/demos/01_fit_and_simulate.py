"""Fit the full system on a synthetic fixture and simulate one day.

Run with ``python demos/01_fit_and_simulate.py``.  Everything happens in a
temporary directory through the same entry point as the ``gridscen`` command.
"""

import json
import tempfile
from pathlib import Path

import pandas as pd

from gridscen import cli


def main():
    with tempfile.TemporaryDirectory() as tmp:
        data = Path(tmp) / "data"
        out = Path(tmp) / "out"

        # 8 zones, 20 wind farms, 30 solar plants, two years of hourly data
        cli.main(["fixture-gen", "--out", str(data)])
        cli.main(["fit", "--config", str(data / "config.toml"),
                  "--out", str(out)])
        report = json.loads((out / "fit_report.json").read_text())
        print("\nfit report")
        for key in ("target_day", "history_days", "wind_independent",
                    "daylight_lags", "joint_lambda", "solar_k"):
            print(f"  {key:17s} {report[key]}")
        print("  strongest joint edges:")
        for a, b, w in sorted(report["joint_edges"],
                              key=lambda e: -abs(e[2]))[:4]:
            print(f"    {a:9s} -- {b:9s} {w:+.3f}")

        cli.main(["simulate", "--config", str(data / "config.toml"),
                  "--out", str(out), "-m", "1000"])
        bands = pd.read_csv(out / "bands_load.csv")
        z1 = bands[bands.unit_id == "Z1"].set_index("scenario_id")
        print("\nload zone Z1, hours 12 to 17 (MW)")
        print(z1.loc[["lower", "forecast", "actual", "upper"],
                     [f"h{h}" for h in range(12, 18)]].round(1))


if __name__ == "__main__":
    main()
