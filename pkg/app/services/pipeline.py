# app/services/pipeline.py
"""Preprocessing steps, work-directory CSV files and dataset preparation shared by the CLI commands."""
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd

from app.core.exceptions import ContractError, DataFormatError
from app.signal.decomposition import DecompositionResult
from app.signal.preprocessing import DEFAULT_MAX_GAP, DEFAULT_OUTLIER_WINDOW, impute_missing, remove_outliers
from app.signal.timeseries import UNIT_KWH, TimeSeries
from app.services.features import (FeatureConfig, FeatureLayout, FeatureScaler, SampleWindow, SplitSpec,
                                   build_all_features, make_splits)
from app.services.ingest import WeatherSeries, format_timestamp, ingest_weather_csv, weather_series
from app.utils import constants
from app.utils.csv_handler import CSVHandler, load_csv_to_dataframe

logger = logging.getLogger(__name__)

EXACT = constants.FLOAT_FORMAT_EXACT


@dataclass(frozen=True)
class PreprocessConfig:
    outlier_z: float = 5.0
    outlier_window: int = DEFAULT_OUTLIER_WINDOW
    max_gap: int = DEFAULT_MAX_GAP

    @classmethod
    def from_config(cls, config) -> "PreprocessConfig":
        return cls(config.get("OUTLIER_Z", 5.0, var_type=float),
                   config.get("OUTLIER_WINDOW", DEFAULT_OUTLIER_WINDOW, var_type=int),
                   config.get("MAX_INTERP_GAP", DEFAULT_MAX_GAP, var_type=int))


def preprocess_demand(series: TimeSeries, config: PreprocessConfig = PreprocessConfig()) -> Tuple[TimeSeries, np.ndarray]:
    """Outlier removal then imputation; returns the clean series and the outlier mask."""
    series = series.regularized()
    cleaned, outliers = remove_outliers(series, config.outlier_z, config.outlier_window)
    return impute_missing(cleaned, config.max_gap), outliers


def preprocess_weather(weather: WeatherSeries, config: PreprocessConfig = PreprocessConfig()) -> WeatherSeries:
    return WeatherSeries(impute_missing(weather.max_temp, config.max_gap),
                         impute_missing(weather.feels_like, config.max_gap))


def align(demand: Dict[str, TimeSeries], weather: WeatherSeries) -> Tuple[Dict[str, TimeSeries], WeatherSeries]:
    """Restricts every series to the hours covered by all of them."""
    starts = [s.timestamps[0] for s in demand.values()] + [weather.timestamps[0]]
    ends = [s.timestamps[-1] for s in demand.values()] + [weather.timestamps[-1]]
    start, end = max(starts), min(ends)
    if start > end:
        raise ContractError(f"align: demand and weather do not overlap ({start} > {end})")
    aligned = {dma_id: series.restrict(start, end) for dma_id, series in demand.items()}
    logger.info(f"Aligned {len(demand)} DMAs and weather to {format_timestamp(start)} .. {format_timestamp(end)}")
    return aligned, weather.restrict(start, end)


def write_meter_csv(demand: Dict[str, TimeSeries], path: str, handler: Optional[CSVHandler] = None) -> str:
    """One synthetic meter per DMA carrying the whole DMA consumption."""
    rows = ([format_timestamp(t), f"{dma_id}-M001", dma_id, EXACT % v]
            for dma_id in sorted(demand)
            for t, v in zip(demand[dma_id].timestamps, demand[dma_id].values))
    return (handler or CSVHandler()).save_csv(path, rows, constants.METER_CSV_HEADER)


def write_weather_csv(weather: WeatherSeries, path: str, handler: Optional[CSVHandler] = None) -> str:
    rows = ([format_timestamp(t), EXACT % a, EXACT % b]
            for t, a, b in zip(weather.timestamps, weather.max_temp.values, weather.feels_like.values))
    return (handler or CSVHandler()).save_csv(path, rows, constants.WEATHER_CSV_HEADER)


def write_demand_csv(demand: Dict[str, TimeSeries], path: str, handler: Optional[CSVHandler] = None) -> str:
    rows = ([format_timestamp(t), dma_id, EXACT % v]
            for dma_id in sorted(demand)
            for t, v in zip(demand[dma_id].timestamps, demand[dma_id].values))
    return (handler or CSVHandler()).save_csv(path, rows, constants.DEMAND_CSV_HEADER)


def read_demand_csv(path: str) -> Dict[str, TimeSeries]:
    frame = load_csv_to_dataframe(path, constants.DEMAND_CSV_HEADER)
    frame["timestamp"] = pd.to_datetime(frame["timestamp"], utc=True, errors="coerce", format="ISO8601")
    if frame["timestamp"].isna().any():
        row = int(frame.index[frame["timestamp"].isna()][0]) + 2
        raise DataFormatError("unparseable timestamp", path=path, row=row)
    frame["demand_kwh"] = pd.to_numeric(frame["demand_kwh"], errors="coerce")
    frame["dma_id"] = frame["dma_id"].astype(str)
    demand = {}
    for dma_id, group in frame.groupby("dma_id", sort=True):
        series = TimeSeries(pd.DatetimeIndex(group["timestamp"]), group["demand_kwh"].to_numpy(dtype=np.float64),
                            UNIT_KWH, dma_id)
        demand[dma_id] = series.regularized()
    if not demand:
        raise DataFormatError("no demand rows", path=path)
    return demand


def read_weather_csv(path: str) -> WeatherSeries:
    records, errors = ingest_weather_csv(path)
    if errors:
        raise DataFormatError(f"malformed weather row: {errors[0].reason}", path=path, row=errors[0].line)
    if not records:
        raise DataFormatError("no weather rows", path=path)
    return weather_series(records)


def decomposition_rows(name: str, timestamps: pd.DatetimeIndex, result: DecompositionResult) -> Iterable[List[str]]:
    for i, t in enumerate(timestamps):
        yield [format_timestamp(t), name, EXACT % result.observed[i], EXACT % result.trend[i],
               EXACT % result.seasonal[i], EXACT % result.residual[i]]


@dataclass
class PreparedData:
    layout: FeatureLayout
    scaler: FeatureScaler
    train: List[SampleWindow]
    val: List[SampleWindow]
    test: List[SampleWindow]


def prepare_data(demand: Dict[str, TimeSeries], weather: WeatherSeries, feature_config: FeatureConfig,
                 split_spec: SplitSpec, target_mode: str = "diff24") -> PreparedData:
    """Windows for every DMA, chronological splits and a scaler fitted on the training split."""
    windows = build_all_features(demand, weather, feature_config, seasonal_fit_end=split_spec.test_start)
    train, val, test = make_splits(windows, split_spec)
    scaler = FeatureScaler.fit(train, target_mode)
    return PreparedData(feature_config.layout(), scaler, train, val, test)
