# app/signal/timeseries.py
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import pandas as pd

from app.core.exceptions import DimensionError

UNIT_KWH = "kWh"
UNIT_CELSIUS = "degC"

HOUR = pd.Timedelta(hours=1)


@dataclass(frozen=True)
class TimeSeries:
    """Hourly values with UTC timestamps; NaN marks a missing hour."""
    timestamps: pd.DatetimeIndex
    values: np.ndarray
    unit: str = UNIT_KWH
    name: str = ""

    def __post_init__(self):
        timestamps = pd.DatetimeIndex(self.timestamps)
        if timestamps.tz is None:
            timestamps = timestamps.tz_localize("UTC")
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if len(timestamps) != len(values):
            raise DimensionError(f"TimeSeries '{self.name}': {len(timestamps)} timestamps but {len(values)} values")
        object.__setattr__(self, "timestamps", timestamps)
        object.__setattr__(self, "values", values)

    @classmethod
    def hourly(cls, start: Union[str, pd.Timestamp], values, unit: str = UNIT_KWH, name: str = "") -> "TimeSeries":
        start = pd.Timestamp(start)
        if start.tzinfo is None:
            start = start.tz_localize("UTC")
        values = np.asarray(values, dtype=np.float64)
        return cls(pd.date_range(start, periods=len(values), freq="h"), values, unit, name)

    @classmethod
    def from_series(cls, series: pd.Series, unit: str = UNIT_KWH, name: Optional[str] = None) -> "TimeSeries":
        return cls(pd.DatetimeIndex(series.index), series.to_numpy(dtype=np.float64), unit,
                   name if name is not None else str(series.name or ""))

    def __len__(self) -> int:
        return len(self.values)

    def with_values(self, values) -> "TimeSeries":
        return TimeSeries(self.timestamps, values, self.unit, self.name)

    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.values)

    def is_regular(self) -> bool:
        """Strictly increasing with exactly one hour between neighbours."""
        if len(self.timestamps) < 2:
            return True
        steps = np.diff(self.timestamps.asi8)
        return bool(np.all(steps == HOUR.value))

    def regularized(self) -> "TimeSeries":
        """Reindexed onto a gap-free hourly grid; inserted hours are NaN."""
        if self.is_regular():
            return self
        series = self.to_series()
        series = series[~series.index.duplicated(keep="last")].sort_index()
        grid = pd.date_range(series.index[0], series.index[-1], freq="h")
        return TimeSeries.from_series(series.reindex(grid), self.unit, self.name)

    def to_series(self) -> pd.Series:
        return pd.Series(self.values, index=self.timestamps, name=self.name)

    def restrict(self, start: pd.Timestamp, end: pd.Timestamp) -> "TimeSeries":
        """Hours in [start, end]."""
        keep = (self.timestamps >= start) & (self.timestamps <= end)
        return TimeSeries(self.timestamps[keep], self.values[keep], self.unit, self.name)
