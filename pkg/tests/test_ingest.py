import datetime as dt

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from gridscen.errors import (DuplicateTimestamp, EmptyHour,
                             InsufficientHistory, NoOverlap, UnitMismatch)
from gridscen.ingest import (compute_deviations, day_forecasts,
                             read_series_csv, resample_hourly, select_history,
                             write_series_csv)


def five_minute_frame(values, unit="A", start="2018-03-01 00:00"):
    ts = pd.date_range(start, periods=len(values), freq="5min")
    return pd.DataFrame({"unit_id": unit, "timestamp": ts, "value": values})


def hourly_frame(units, days, fn):
    rows = []
    for u in units:
        for d in days:
            for h in range(24):
                rows.append((u, pd.Timestamp(d) + pd.Timedelta(hours=h),
                             fn(u, d, h)))
    return pd.DataFrame(rows, columns=["unit_id", "timestamp", "value"])


class TestResample:
    def test_constant_hour(self):
        out = resample_hourly(five_minute_frame([7.0] * 12,
                                                start="2018-03-01 03:00"))
        assert len(out) == 1
        assert out["value"].iloc[0] == 7.0
        assert out["timestamp"].iloc[0].hour == 3

    def test_two_point_mean(self):
        df = pd.DataFrame({"unit_id": "A",
                           "timestamp": pd.to_datetime(["2018-01-01 05:00",
                                                        "2018-01-01 05:30"]),
                           "value": [0.0, 10.0]})
        assert resample_hourly(df)["value"].iloc[0] == 5.0

    def test_ramp_day(self):
        ramp = np.arange(288, dtype=float)
        out = resample_hourly(five_minute_frame(ramp))
        assert len(out) == 24
        # oracle: direct summation of each block of twelve samples
        expected = [sum(range(12 * h, 12 * h + 12)) / 12 for h in range(24)]
        np.testing.assert_allclose(out["value"], expected, rtol=0, atol=1e-12)
        np.testing.assert_allclose(out["value"], 12 * np.arange(24) + 5.5)

    def test_idempotent_on_hourly(self):
        df = hourly_frame(["A", "B"], [dt.date(2018, 1, 1)],
                          lambda u, d, h: h * 1.5 + (u == "B"))
        once = resample_hourly(df)
        twice = resample_hourly(once)
        pd.testing.assert_frame_equal(once, twice)
        np.testing.assert_array_equal(once["value"].to_numpy(),
                                      df.sort_values(["unit_id", "timestamp"])
                                      ["value"].to_numpy())

    def test_gap_raises(self):
        df = five_minute_frame(np.ones(36))
        df = df[(df["timestamp"].dt.hour != 1)]
        with pytest.raises(EmptyHour):
            resample_hourly(df)
        assert len(resample_hourly(df, fill="drop")) == 2

    def test_duplicate_timestamp_rejected(self):
        df = five_minute_frame([1.0, 2.0])
        df = pd.concat([df, df.iloc[[0]]])
        with pytest.raises(DuplicateTimestamp):
            resample_hourly(df)


class TestDeviations:
    days = [dt.date(2018, 1, 1) + dt.timedelta(days=k) for k in range(3)]

    def test_identity_gives_zero(self):
        df = hourly_frame(["A"], self.days, lambda u, d, h: 50.0 + h)
        panel = compute_deviations(df, df, ["A"])
        assert panel.deviations.shape == (1, 24, 3)
        assert not panel.deviations.any()

    def test_definition(self):
        act = hourly_frame(["A"], self.days, lambda *a: 100.0)
        fc = hourly_frame(["A"], self.days, lambda *a: 90.0)
        panel = compute_deviations(act, fc, ["A"])
        assert np.all(panel.deviations == 10.0)

    def test_eight_zones_give_192_series(self):
        zones = [f"z{i}" for i in range(8)]
        df = hourly_frame(zones, self.days, lambda *a: 1.0)
        panel = compute_deviations(df, df, zones)
        assert panel.deviations.shape[0] * panel.deviations.shape[1] == 192

    def test_incomplete_day_dropped(self):
        act = hourly_frame(["A", "B"], self.days, lambda *a: 1.0)
        fc = hourly_frame(["A", "B"], self.days, lambda *a: 0.5)
        act = act.drop(index=30)  # unit A, second day
        panel = compute_deviations(act, fc, ["A", "B"])
        assert panel.days == (self.days[0], self.days[2])
        assert panel.dropped_days == (self.days[1],)

    def test_unit_mismatch(self):
        df = hourly_frame(["A"], self.days, lambda *a: 1.0)
        with pytest.raises(UnitMismatch):
            compute_deviations(df, df, ["A", "B"])

    def test_no_overlap(self):
        act = hourly_frame(["A"], self.days[:1], lambda *a: 1.0)
        fc = hourly_frame(["A"], self.days[1:], lambda *a: 1.0)
        with pytest.raises(NoOverlap):
            compute_deviations(act, fc, ["A"])

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(-1e4, 1e4), min_size=48, max_size=48),
           st.lists(st.floats(-1e4, 1e4), min_size=48, max_size=48))
    def test_actuals_round_trip(self, a, f):
        days = self.days[:2]
        act = hourly_frame(["A"], days, lambda u, d, h: a[24 * days.index(d) + h])
        fc = hourly_frame(["A"], days, lambda u, d, h: f[24 * days.index(d) + h])
        panel = compute_deviations(act, fc, ["A"])
        rebuilt = panel.deviations + panel.forecasts
        # IEEE: (a - f) + f can differ from a in the last bit; only exact
        # cancellation is guaranteed when the subtraction was exact
        np.testing.assert_allclose(rebuilt[0].T.ravel(), a, rtol=1e-15,
                                   atol=1e-12)

    def test_day_forecasts(self):
        fc = hourly_frame(["A", "B"], self.days, lambda u, d, h: h + 100 * (u == "B"))
        out = day_forecasts(fc, ["B", "A"], self.days[1])
        assert out.shape == (2, 24)
        np.testing.assert_array_equal(out[0], np.arange(24) + 100)


class TestSelectHistory:
    @staticmethod
    def calendar(start, end):
        n = (end - start).days + 1
        return {start + dt.timedelta(days=k) for k in range(n)}

    def test_default_window_two_years(self):
        avail = self.calendar(dt.date(2017, 1, 1), dt.date(2018, 12, 31))
        w = select_history(dt.date(2018, 7, 1), avail, n=50)
        expected = (self.calendar(dt.date(2017, 5, 12), dt.date(2017, 8, 20))
                    | self.calendar(dt.date(2018, 5, 12), dt.date(2018, 6, 30)))
        assert set(w.history_days) == expected
        assert not w.in_sample
        assert len(w) == 50 + 101

    def test_in_sample_fallback(self):
        avail = self.calendar(dt.date(2018, 1, 1), dt.date(2019, 3, 31))
        w = select_history(dt.date(2018, 12, 31), avail, n=50)
        assert w.in_sample
        assert dt.date(2018, 12, 31) not in w.history_days
        assert max(w.history_days) == dt.date(2019, 2, 19)

    def test_n_equals_one(self):
        avail = self.calendar(dt.date(2017, 1, 1), dt.date(2018, 12, 31))
        w = select_history(dt.date(2018, 6, 15), avail, n=1, min_days=1)
        # by hand: 2018-06-14, and 2017-06-14/15/16
        assert w.history_days == (dt.date(2017, 6, 14), dt.date(2017, 6, 15),
                                  dt.date(2017, 6, 16), dt.date(2018, 6, 14))

    def test_feb29_maps_to_feb28(self):
        avail = self.calendar(dt.date(2019, 1, 1), dt.date(2020, 12, 31))
        w = select_history(dt.date(2020, 2, 29), avail, n=1, min_days=1)
        assert dt.date(2019, 2, 28) in w.history_days
        assert dt.date(2019, 3, 1) in w.history_days

    def test_insufficient(self):
        avail = self.calendar(dt.date(2018, 6, 1), dt.date(2018, 6, 20))
        with pytest.raises(InsufficientHistory):
            select_history(dt.date(2018, 6, 10), avail, n=50)

    @settings(max_examples=50, deadline=None)
    @given(st.dates(dt.date(2017, 3, 1), dt.date(2018, 10, 31)),
           st.integers(1, 60))
    def test_never_contains_target(self, target, n):
        avail = self.calendar(dt.date(2016, 1, 1), dt.date(2018, 12, 31))
        w = select_history(target, avail, n=n, min_days=1)
        assert target not in w.history_days
        assert len(w) <= n + 2 * n + 1
        assert max(w.history_days) < target


def test_csv_round_trip(tmp_path):
    df = hourly_frame(["A", "B"], [dt.date(2018, 1, 1)], lambda u, d, h: h / 3)
    path = tmp_path / "s.csv"
    write_series_csv(df, path)
    back = read_series_csv(path)
    assert back.shape == df.shape
    np.testing.assert_allclose(back["value"], df["value"], atol=1e-6)
    assert path.read_text().splitlines()[0] == "unit_id,timestamp,value"
