"""Reading actuals/forecasts, hourly resampling, deviation panels and
non-anticipative history windows.

Series are handled as long-format :class:`pandas.DataFrame` objects with the
columns ``unit_id``, ``timestamp`` (naive local time) and ``value`` (MW).
"""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .errors import (DataError, DuplicateTimestamp, EmptyHour,
                     InsufficientHistory, NoOverlap, UnitMismatch)

logger = logging.getLogger(__name__)

N_LAGS = 24
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M"
SERIES_COLUMNS = ["unit_id", "timestamp", "value"]


@dataclass(frozen=True)
class DeviationPanel:
    """Hourly deviations arranged as (unit, lag, day).

    ``deviations[u, l, d] == actual - forecast`` for unit ``units[u]`` at
    hour ``l`` of ``days[d]``.  Forecasts are kept so that actuals can be
    rebuilt exactly.
    """

    units: tuple
    days: tuple
    deviations: np.ndarray
    forecasts: np.ndarray
    dropped_days: tuple = field(default=())

    def __post_init__(self):
        p, q, n = len(self.units), N_LAGS, len(self.days)
        for name in ("deviations", "forecasts"):
            arr = getattr(self, name)
            if arr.shape != (p, q, n):
                raise ValueError(f"{name} has shape {arr.shape}, "
                                 f"expected {(p, q, n)}")

    @property
    def actuals(self) -> np.ndarray:
        return self.forecasts + self.deviations

    @property
    def n_days(self) -> int:
        return len(self.days)

    def day_index(self, days: Iterable[dt.date]) -> np.ndarray:
        lookup = {d: i for i, d in enumerate(self.days)}
        return np.array([lookup[d] for d in days if d in lookup], dtype=int)

    def subset(self, days: Iterable[dt.date]) -> "DeviationPanel":
        """Restrict the panel to ``days`` (those absent are skipped)."""
        idx = self.day_index(days)
        return DeviationPanel(
            units=self.units,
            days=tuple(self.days[i] for i in idx),
            deviations=self.deviations[:, :, idx].copy(),
            forecasts=self.forecasts[:, :, idx].copy(),
        )

    def select_units(self, units: Sequence) -> "DeviationPanel":
        lookup = {u: i for i, u in enumerate(self.units)}
        try:
            idx = [lookup[u] for u in units]
        except KeyError as exc:
            raise UnitMismatch(f"unit {exc.args[0]!r} not in panel") from None
        return DeviationPanel(tuple(units), self.days,
                              self.deviations[idx].copy(),
                              self.forecasts[idx].copy())


@dataclass(frozen=True)
class DayWindow:
    target_day: dt.date
    history_days: tuple
    half_width: int = 50
    in_sample: bool = False

    def __len__(self):
        return len(self.history_days)


def _check_frame(df: pd.DataFrame) -> pd.DataFrame:
    missing = set(SERIES_COLUMNS) - set(df.columns)
    if missing:
        raise DataError(f"series frame lacks columns {sorted(missing)}")
    df = df[SERIES_COLUMNS].copy()
    df["unit_id"] = df["unit_id"].astype(str)
    df["timestamp"] = pd.to_datetime(df["timestamp"])
    df["value"] = df["value"].astype(float)
    if not np.isfinite(df["value"].to_numpy()).all():
        raise DataError("series contains non-finite values")
    return df


def resample_hourly(records: pd.DataFrame, fill: str | None = None
                    ) -> pd.DataFrame:
    """Average sub-hourly samples into one record per (unit, hour).

    Parameters
    ----------
    records : DataFrame
        Long-format series with ``unit_id``, ``timestamp``, ``value``.
    fill : {None, "drop"}
        What to do with hours that have no sample between a unit's first and
        last timestamp.  ``None`` raises :class:`EmptyHour`; ``"drop"`` leaves
        the hour out, so the day is later discarded by
        :func:`compute_deviations`.

    Returns
    -------
    DataFrame
        Hourly records sorted by unit then timestamp.  Already-hourly input
        comes back unchanged.
    """
    if fill not in (None, "drop"):
        raise ValueError(f"unknown fill policy {fill!r}")
    df = _check_frame(records)
    if df.duplicated(["unit_id", "timestamp"]).any():
        dup = df[df.duplicated(["unit_id", "timestamp"], keep=False)]
        raise DuplicateTimestamp(
            "repeated timestamps (daylight-saving fold?) for "
            f"{dup['unit_id'].iloc[0]!r} at {dup['timestamp'].iloc[0]}")
    df["timestamp"] = df["timestamp"].dt.floor("h")
    hourly = (df.groupby(["unit_id", "timestamp"], sort=True)["value"]
              .mean().reset_index())

    for unit, grp in hourly.groupby("unit_id", sort=False):
        ts = grp["timestamp"]
        expected = (ts.iloc[-1] - ts.iloc[0]) // pd.Timedelta(hours=1) + 1
        if expected != len(ts) and fill is None:
            full = pd.date_range(ts.iloc[0], ts.iloc[-1], freq="h")
            gap = full.difference(pd.DatetimeIndex(ts))[0]
            raise EmptyHour(f"no samples for unit {unit!r} in hour {gap}")
    return hourly


def compute_deviations(actuals: pd.DataFrame, forecasts: pd.DataFrame,
                       units: Sequence[str] | None = None) -> DeviationPanel:
    """Build the (unit, lag, day) deviation panel ``actual - forecast``.

    Only days for which every unit has all 24 hours in both sources are kept;
    the others are listed in ``dropped_days`` and logged.
    """
    actuals = _check_frame(actuals)
    forecasts = _check_frame(forecasts)
    if units is None:
        units = sorted(set(actuals["unit_id"]) & set(forecasts["unit_id"]))
    units = [str(u) for u in units]
    for name, frame in (("actuals", actuals), ("forecasts", forecasts)):
        absent = set(units) - set(frame["unit_id"])
        if absent:
            raise UnitMismatch(f"units {sorted(absent)} missing from {name}")

    merged = actuals.merge(forecasts, on=["unit_id", "timestamp"],
                           suffixes=("_act", "_fcst"))
    merged = merged[merged["unit_id"].isin(units)]
    merged["day"] = merged["timestamp"].dt.date
    merged["lag"] = merged["timestamp"].dt.hour

    all_days = sorted(set(actuals["timestamp"].dt.date)
                      | set(forecasts["timestamp"].dt.date))
    counts = merged.groupby("day").size()
    complete = sorted(counts.index[counts == len(units) * N_LAGS])
    keep = set(complete)
    dropped = tuple(d for d in all_days if d not in keep)
    if dropped:
        logger.info("dropping %d incomplete days (first: %s)",
                    len(dropped), dropped[0])
    if not complete:
        raise NoOverlap("no day has complete actuals and forecasts")

    merged = merged[merged["day"].isin(keep)]
    u_idx = pd.Categorical(merged["unit_id"], categories=units).codes
    d_idx = pd.Categorical(merged["day"], categories=complete).codes
    l_idx = merged["lag"].to_numpy()
    shape = (len(units), N_LAGS, len(complete))
    act = np.empty(shape)
    fc = np.empty(shape)
    act[u_idx, l_idx, d_idx] = merged["value_act"].to_numpy()
    fc[u_idx, l_idx, d_idx] = merged["value_fcst"].to_numpy()
    return DeviationPanel(tuple(units), tuple(complete), act - fc, fc,
                          dropped_days=dropped)


def day_forecasts(forecasts: pd.DataFrame, units: Sequence[str],
                  day: dt.date) -> np.ndarray:
    """Return the ``(len(units), 24)`` forecast matrix for one day."""
    df = _check_frame(forecasts)
    df = df[df["timestamp"].dt.date == day]
    table = df.pivot_table(index="unit_id", columns=df["timestamp"].dt.hour,
                           values="value", aggfunc="mean")
    try:
        out = table.loc[list(units), list(range(N_LAGS))].to_numpy(float)
    except KeyError:
        raise DataError(f"forecasts for {day} incomplete") from None
    if np.isnan(out).any():
        raise DataError(f"forecasts for {day} incomplete")
    return out


def _anniversary(day: dt.date, year: int) -> dt.date:
    if day.month == 2 and day.day == 29:
        return dt.date(year, 2, 28)
    return day.replace(year=year)


def select_history(target_day: dt.date, available_days: Iterable[dt.date],
                   n: int = 50, min_days: int = 60) -> DayWindow:
    """Pick the non-anticipative fitting window for ``target_day``.

    The window holds the ``n`` days preceding the target plus those days of
    the previous calendar year inside the ``2n+1`` days centred on the
    target's anniversary, restricted to the days actually available.  When fewer than ``min_days`` remain and no
    previous-year day is available, the window instead spans
    ``[target - n, target + n]`` without the target itself and is flagged
    ``in_sample``.
    """
    if n < 1:
        raise ValueError("half width n must be >= 1")
    available = set(available_days)
    one = dt.timedelta(days=1)

    preceding = {target_day - k * one for k in range(1, n + 1)}
    anniv = _anniversary(target_day, target_day.year - 1)
    prior = {anniv + k * one for k in range(-n, n + 1)}
    prior = {d for d in prior if d.year == target_day.year - 1}
    prior_avail = prior & available
    days = (preceding | prior) & available
    days.discard(target_day)

    if len(days) >= min_days:
        return DayWindow(target_day, tuple(sorted(days)), n)
    if prior_avail:
        raise InsufficientHistory(
            f"only {len(days)} history days for {target_day}, "
            f"need {min_days}")

    around = {target_day + k * one for k in range(-n, n + 1)} & available
    around.discard(target_day)
    if len(around) < min_days:
        raise InsufficientHistory(
            f"in-sample fallback gives {len(around)} days for {target_day}, "
            f"need {min_days}")
    logger.warning("no prior-year history for %s: fitting in-sample on "
                   "[t-%d, t+%d]", target_day, n, n)
    return DayWindow(target_day, tuple(sorted(around)), n, in_sample=True)


def read_series_csv(path: str | Path) -> pd.DataFrame:
    """Read a ``unit_id,timestamp,value`` file."""
    df = pd.read_csv(path, dtype={"unit_id": str})
    missing = set(SERIES_COLUMNS) - set(df.columns)
    if missing:
        raise DataError(f"{path}: missing columns {sorted(missing)}")
    try:
        df["timestamp"] = pd.to_datetime(df["timestamp"],
                                         format=TIMESTAMP_FORMAT)
    except (ValueError, TypeError) as exc:
        raise DataError(f"{path}: bad timestamp ({exc})") from None
    return _check_frame(df)


def write_series_csv(df: pd.DataFrame, path: str | Path) -> None:
    out = df[SERIES_COLUMNS].copy()
    stamps = pd.to_datetime(out["timestamp"]).to_numpy()
    uniq, inv = np.unique(stamps, return_inverse=True)
    # format each distinct stamp once; strftime per row is slow
    out["timestamp"] = pd.DatetimeIndex(uniq).strftime(
        TIMESTAMP_FORMAT).to_numpy()[inv]
    out.to_csv(path, index=False, float_format="%.6f")


def read_capacity_csv(path: str | Path) -> dict:
    df = pd.read_csv(path, dtype={"unit_id": str})
    if not {"unit_id", "capacity_mw"} <= set(df.columns):
        raise DataError(f"{path}: expected unit_id,capacity_mw")
    return dict(zip(df["unit_id"], df["capacity_mw"].astype(float)))


def check_capacity(actuals: pd.DataFrame, capacity: dict,
                   atol: float = 1e-6) -> None:
    """Raise if an actual lies outside ``[0, capacity]`` for a known unit."""
    df = _check_frame(actuals)
    cap = df["unit_id"].map(capacity)
    known = cap.notna()
    bad = known & ((df["value"] < -atol) | (df["value"] > cap + atol))
    if bad.any():
        row = df[bad].iloc[0]
        raise DataError(f"{int(bad.sum())} actuals outside [0, capacity], "
                        f"e.g. {row['unit_id']} at {row['timestamp']}")
