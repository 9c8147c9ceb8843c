# app/services/ingest.py
"""
Smart-meter and weather CSV ingestion.

Malformed rows never abort ingestion: they are collected into an error report
with their line number and reason. Only an unreadable file or a missing header
column raises.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from app.core.exceptions import ContractError, DimensionError
from app.signal.timeseries import UNIT_CELSIUS, UNIT_KWH, TimeSeries
from app.utils import constants
from app.utils.csv_handler import CSVHandler

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MeterReading:
    meter_id: str
    dma_id: str
    timestamp: pd.Timestamp
    consumption_kwh: float


@dataclass(frozen=True)
class WeatherRecord:
    timestamp: pd.Timestamp
    max_temp_c: float
    feels_like_c: float


@dataclass(frozen=True)
class RowError:
    line: int
    reason: str
    raw: Tuple[str, ...]

    def __str__(self):
        return f"line {self.line}: {self.reason} ({','.join(self.raw)})"


@dataclass(frozen=True)
class WeatherSeries:
    """Hourly maximum and feels-like temperature on a shared UTC index."""
    max_temp: TimeSeries
    feels_like: TimeSeries

    def __post_init__(self):
        if not self.max_temp.timestamps.equals(self.feels_like.timestamps):
            raise DimensionError("WeatherSeries: max_temp and feels_like have different timestamps")

    @property
    def timestamps(self) -> pd.DatetimeIndex:
        return self.max_temp.timestamps

    def __len__(self) -> int:
        return len(self.max_temp)

    def restrict(self, start: pd.Timestamp, end: pd.Timestamp) -> "WeatherSeries":
        return WeatherSeries(self.max_temp.restrict(start, end), self.feels_like.restrict(start, end))


def _parse_timestamps(texts: Sequence[str]) -> pd.Series:
    parsed = pd.to_datetime(pd.Series(list(texts), dtype=object), utc=True, errors="coerce", format="ISO8601")
    return parsed


def _parse_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value '{text}'")
    return value


def _timestamp_problem(timestamp) -> str:
    if pd.isna(timestamp):
        return "unparseable timestamp"
    if timestamp != timestamp.floor("h"):
        return "timestamp not on a whole hour"
    return ""


def ingest_meter_csv(path: str, handler: CSVHandler = None) -> Tuple[List[MeterReading], List[RowError]]:
    """
    Reads ``timestamp,meter_id,dma_id,consumption_kwh``.

    Returns:
        (readings, error report)
    """
    handler = handler or CSVHandler()
    header, rows = handler.load_csv(path, constants.METER_CSV_HEADER)
    index = {name: header.index(name) for name in constants.METER_CSV_HEADER}
    width = max(index.values()) + 1

    timestamps = _parse_timestamps([row[index["timestamp"]] if len(row) >= width else "" for _, row in rows])
    readings: List[MeterReading] = []
    errors: List[RowError] = []
    for (line, row), timestamp in zip(rows, timestamps):
        raw = tuple(row)
        if len(row) < width:
            errors.append(RowError(line, f"expected {len(header)} columns, got {len(row)}", raw))
            continue
        problem = _timestamp_problem(timestamp)
        if problem:
            errors.append(RowError(line, problem, raw))
            continue
        meter_id = row[index["meter_id"]].strip()
        dma_id = row[index["dma_id"]].strip()
        if not meter_id or not dma_id:
            errors.append(RowError(line, "empty meter_id or dma_id", raw))
            continue
        try:
            consumption = _parse_float(row[index["consumption_kwh"]])
        except ValueError:
            errors.append(RowError(line, "non-numeric consumption_kwh", raw))
            continue
        readings.append(MeterReading(meter_id, dma_id, timestamp, consumption))

    if errors:
        logger.warning(f"{len(errors)} malformed rows in {path}; first: {errors[0]}")
    logger.info(f"Ingested {len(readings)} meter readings from {path}")
    return readings, errors


def ingest_weather_csv(path: str, handler: CSVHandler = None) -> Tuple[List[WeatherRecord], List[RowError]]:
    """Reads ``timestamp,max_temp_c,feels_like_c`` with the same error-report contract."""
    handler = handler or CSVHandler()
    header, rows = handler.load_csv(path, constants.WEATHER_CSV_HEADER)
    index = {name: header.index(name) for name in constants.WEATHER_CSV_HEADER}
    width = max(index.values()) + 1

    timestamps = _parse_timestamps([row[index["timestamp"]] if len(row) >= width else "" for _, row in rows])
    records: List[WeatherRecord] = []
    errors: List[RowError] = []
    for (line, row), timestamp in zip(rows, timestamps):
        raw = tuple(row)
        if len(row) < width:
            errors.append(RowError(line, f"expected {len(header)} columns, got {len(row)}", raw))
            continue
        problem = _timestamp_problem(timestamp)
        if problem:
            errors.append(RowError(line, problem, raw))
            continue
        try:
            max_temp = _parse_float(row[index["max_temp_c"]])
            feels_like = _parse_float(row[index["feels_like_c"]])
        except ValueError:
            errors.append(RowError(line, "non-numeric temperature", raw))
            continue
        records.append(WeatherRecord(timestamp, max_temp, feels_like))

    if errors:
        logger.warning(f"{len(errors)} malformed rows in {path}; first: {errors[0]}")
    logger.info(f"Ingested {len(records)} weather records from {path}")
    return records, errors


def _hourly_grid(start: pd.Timestamp, end: pd.Timestamp) -> pd.DatetimeIndex:
    return pd.date_range(start, end, freq="h")


def aggregate_dma(readings: Sequence[MeterReading]) -> Dict[str, TimeSeries]:
    """
    Hourly consumption summed per DMA over the common span of all readings.

    Hours without any reading are NaN.
    """
    if not readings:
        raise ContractError("aggregate_dma: no readings")
    frame = pd.DataFrame({
        "dma_id": [r.dma_id for r in readings],
        "timestamp": pd.DatetimeIndex([r.timestamp for r in readings]),
        "consumption_kwh": np.array([r.consumption_kwh for r in readings], dtype=np.float64),
    })
    grid = _hourly_grid(frame["timestamp"].min(), frame["timestamp"].max())
    totals = frame.groupby(["dma_id", "timestamp"])["consumption_kwh"].sum()

    demand: Dict[str, TimeSeries] = {}
    for dma_id in sorted(frame["dma_id"].unique()):
        hourly = totals.loc[dma_id].reindex(grid)
        demand[dma_id] = TimeSeries(grid, hourly.to_numpy(dtype=np.float64), UNIT_KWH, dma_id)
        missing = int(np.isnan(demand[dma_id].values).sum())
        if missing:
            logger.info(f"DMA {dma_id}: {missing} of {len(grid)} hours have no readings")
    return demand


def weather_series(records: Sequence[WeatherRecord]) -> WeatherSeries:
    """Hourly weather on a gap-free grid; missing hours are NaN, duplicates keep the last record."""
    if not records:
        raise ContractError("weather_series: no weather records")
    frame = pd.DataFrame({
        "timestamp": pd.DatetimeIndex([r.timestamp for r in records]),
        "max_temp_c": [r.max_temp_c for r in records],
        "feels_like_c": [r.feels_like_c for r in records],
    }).drop_duplicates("timestamp", keep="last").set_index("timestamp").sort_index()
    grid = _hourly_grid(frame.index[0], frame.index[-1])
    frame = frame.reindex(grid)
    return WeatherSeries(
        TimeSeries(grid, frame["max_temp_c"].to_numpy(dtype=np.float64), UNIT_CELSIUS, "max_temp"),
        TimeSeries(grid, frame["feels_like_c"].to_numpy(dtype=np.float64), UNIT_CELSIUS, "feels_like"),
    )


def format_timestamp(timestamp: pd.Timestamp) -> str:
    return timestamp.strftime(constants.TIMESTAMP_FORMAT)
