# app/services/features.py
"""
Feature assembly: one SampleWindow per DMA per midnight origin.

Channel order (default configuration):

    endogenous  demand_lag24, demand_lag168, demand_trend, demand_seasonal, demand_residual
    exogenous   max_temp, feels_like, temp_trend, temp_residual,      (weather)
                hour_sin, hour_cos, dow_sin, dow_cos                  (time)

Every channel is a 24-hour window rendered as a scalogram and stored as a
scale×time image (rows are scales, columns are time positions). The raw
windows are kept as well for sequence models.

Demand lag-k windows cover [t−k, t−k+24). Trends come from one centered moving
average over the whole series; demand component windows end half a period
before the origin and temperature component windows end half a period before
the end of the forecast day, so the moving average never reads past what the
window is allowed to see. Seasonal patterns are per-position means of the
detrended series over the data before the window end, frozen at
``seasonal_fit_end`` (the start of the test year when building splits).
Hour and weekday channels are scalogram-transformed after a shift to [0, 1].
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from app.core.exceptions import ContractError
from app.signal.decomposition import DecompositionResult, expanding_position_means, seasonal_decompose
from app.signal.preprocessing import cyclical_encode
from app.signal.timeseries import TimeSeries
from app.signal.wavelet import default_scales, scalogram_stack
from app.services.ingest import WeatherSeries
from app.utils import constants

logger = logging.getLogger(__name__)

CWT_MODES = ("difference", "raw")
TARGET_MODES = ("diff24", "level")
TIME_CHANNELS = ("hour_sin", "hour_cos", "dow_sin", "dow_cos")


@dataclass(frozen=True)
class FeatureLayout:
    """Channel names in model-input order."""
    endogenous: Tuple[str, ...]
    weather: Tuple[str, ...]
    time: Tuple[str, ...] = TIME_CHANNELS
    window_hours: int = constants.WINDOW_HOURS
    n_scales: int = constants.N_SCALES

    @property
    def exogenous(self) -> Tuple[str, ...]:
        return self.weather + self.time

    @property
    def n_endogenous(self) -> int:
        return len(self.endogenous)

    @property
    def n_exogenous(self) -> int:
        return len(self.exogenous)

    @property
    def n_channels(self) -> int:
        return self.n_endogenous + self.n_exogenous

    def to_dict(self) -> dict:
        return {"endogenous": list(self.endogenous), "weather": list(self.weather), "time": list(self.time),
                "window_hours": self.window_hours, "n_scales": self.n_scales}

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureLayout":
        return cls(tuple(data["endogenous"]), tuple(data["weather"]), tuple(data["time"]),
                   int(data["window_hours"]), int(data["n_scales"]))


@dataclass(frozen=True)
class FeatureConfig:
    lags: Tuple[int, ...] = (24, constants.HOURS_PER_WEEK)
    use_decomposition: bool = True
    decomposition_period: int = 24
    demand_cwt_mode: str = "difference"
    temperature_cwt_mode: str = "raw"
    window_hours: int = constants.WINDOW_HOURS
    n_scales: int = constants.N_SCALES

    def __post_init__(self):
        if not self.lags or any(lag < self.window_hours for lag in self.lags):
            raise ContractError(f"FeatureConfig: lags must be at least {self.window_hours} hours, got {self.lags}")
        for name in ("demand_cwt_mode", "temperature_cwt_mode"):
            if getattr(self, name) not in CWT_MODES:
                raise ContractError(f"FeatureConfig: {name} must be one of {CWT_MODES}")
        if self.decomposition_period < 2:
            raise ContractError(f"FeatureConfig: decomposition_period must be at least 2, got {self.decomposition_period}")

    @classmethod
    def from_config(cls, config) -> "FeatureConfig":
        lags = tuple(int(v) for v in config.get("LAGS", var_type=list))
        return cls(
            lags=lags,
            use_decomposition=config.get("USE_DECOMPOSITION", True, var_type=bool),
            decomposition_period=config.get("DECOMPOSITION_PERIOD", 24, var_type=int),
            demand_cwt_mode=config.get("DEMAND_CWT_MODE", "difference"),
            temperature_cwt_mode=config.get("TEMPERATURE_CWT_MODE", "raw"),
        )

    def layout(self) -> FeatureLayout:
        endogenous = tuple(f"demand_lag{lag}" for lag in self.lags)
        weather = ("max_temp", "feels_like")
        if self.use_decomposition:
            endogenous += ("demand_trend", "demand_seasonal", "demand_residual")
            weather += ("temp_trend", "temp_residual")
        return FeatureLayout(endogenous, weather, TIME_CHANNELS, self.window_hours, self.n_scales)


@dataclass(frozen=True, eq=False)
class SampleWindow:
    origin: pd.Timestamp
    dma_id: str
    endogenous: np.ndarray          # (N_c, s, h) scalogram images
    exogenous: np.ndarray           # (N_w + N_t, s, h)
    endogenous_series: np.ndarray   # (N_c, h) raw channel windows
    exogenous_series: np.ndarray    # (N_w + N_t, h)
    target: np.ndarray              # demand over [t, t+24), kWh
    last_day: np.ndarray            # demand over [t−24, t), kWh
    layout: FeatureLayout = field(repr=False, compare=False)


def _first_mismatch(demand: TimeSeries, weather: WeatherSeries) -> Optional[pd.Timestamp]:
    a, b = demand.timestamps, weather.timestamps
    common = min(len(a), len(b))
    differs = np.flatnonzero(a[:common].asi8 != b[:common].asi8)
    if differs.size:
        return min(a[differs[0]], b[differs[0]])
    if len(a) != len(b):
        return a[common] if len(a) > common else b[common]
    return None


def _slices(values: np.ndarray, starts: np.ndarray, length: int) -> np.ndarray:
    return sliding_window_view(values, length)[starts]


def _cwt_input(windows: np.ndarray, mode: str) -> np.ndarray:
    if mode == "difference":
        return np.diff(windows, axis=-1, prepend=windows[..., :1])
    return windows


def _components(parts: DecompositionResult, starts: np.ndarray, means: np.ndarray, length: int) -> List[np.ndarray]:
    """Trend, seasonal and residual windows; seasonal values come from each window's own pattern row."""
    positions = (starts[:, None] + np.arange(length)) % parts.period
    trend = _slices(parts.trend, starts, length)
    seasonal = np.take_along_axis(means, positions, axis=1)
    return [trend, seasonal, _slices(parts.observed, starts, length) - trend - seasonal]


def build_features(demand: TimeSeries, weather: WeatherSeries, config: Optional[FeatureConfig] = None,
                   seasonal_fit_end: Optional[pd.Timestamp] = None) -> List[SampleWindow]:
    """
    Assembles the sample windows of one DMA; demand and weather must share one hourly index.

    Seasonal patterns stop learning at ``seasonal_fit_end``: windows after it
    reuse the pattern fitted on the data before it.
    """
    config = config or FeatureConfig()
    mismatch = _first_mismatch(demand, weather)
    if mismatch is not None:
        raise ContractError(f"build_features: demand '{demand.name}' and weather are misaligned; "
                            f"first mismatched hour {mismatch.strftime(constants.TIMESTAMP_FORMAT)}")
    for series in (demand, weather.max_temp, weather.feels_like):
        if np.any(np.isnan(series.values)):
            raise ContractError(f"build_features: '{series.name}' has missing values; preprocess first")

    layout = config.layout()
    h, horizon = config.window_hours, constants.HORIZON
    n = len(demand)
    timestamps = demand.timestamps
    history = max(max(config.lags), horizon)
    candidates = np.flatnonzero(timestamps.hour == 0)
    origins = candidates[(candidates >= history) & (candidates + max(horizon, h) <= n)]

    period = config.decomposition_period
    shift = period // 2
    if config.use_decomposition:
        demand_parts = seasonal_decompose(demand, period)
        temp_parts = seasonal_decompose(weather.max_temp, period)
        fit_stop = n
        if seasonal_fit_end is not None:
            # the centered moving average reads half a period ahead
            fit_stop = max(int(timestamps.searchsorted(seasonal_fit_end)) - shift, 0)
        demand_start = origins - shift - h
        temp_start = origins - shift
        keep = (demand_start >= 0) & (temp_start >= 0) & (temp_start + h <= n)
        origins, demand_start, temp_start = origins[keep], demand_start[keep], temp_start[keep]
        # detrended values below a cutoff only read data before the window end
        demand_means = expanding_position_means(demand_parts, np.minimum(demand_start + h, fit_stop))
        temp_means = expanding_position_means(temp_parts, np.minimum(temp_start + h, fit_stop))
        inside = (_slices(demand_parts.mask, demand_start, h).all(axis=1)
                  & _slices(temp_parts.mask, temp_start, h).all(axis=1)
                  & ~np.isnan(demand_means).any(axis=1) & ~np.isnan(temp_means).any(axis=1))
        skipped = int((~inside).sum())
        if skipped:
            logger.debug(f"DMA {demand.name}: skipped {skipped} origins outside the decomposition range")
        origins, demand_start, temp_start = origins[inside], demand_start[inside], temp_start[inside]
        demand_means, temp_means = demand_means[inside], temp_means[inside]

    if origins.size == 0:
        raise ContractError(f"build_features: series '{demand.name}' ({n} hours) is too short for one window")

    endo = [_slices(demand.values, origins - lag, h) for lag in config.lags]
    endo_cwt = [_cwt_input(w, config.demand_cwt_mode) for w in endo]
    weather_windows = [_slices(weather.max_temp.values, origins, h), _slices(weather.feels_like.values, origins, h)]
    exo_cwt = [_cwt_input(w, config.temperature_cwt_mode) for w in weather_windows]
    exo = list(weather_windows)
    if config.use_decomposition:
        components = _components(demand_parts, demand_start, demand_means, h)
        endo += components
        endo_cwt += components
        temp_trend, _, temp_residual = _components(temp_parts, temp_start, temp_means, h)
        exo += [temp_trend, temp_residual]
        exo_cwt += [temp_trend, temp_residual]

    hour_sin, hour_cos = cyclical_encode(timestamps.hour.to_numpy(), 24)
    dow_sin, dow_cos = cyclical_encode(timestamps.dayofweek.to_numpy(), 7)
    time_windows = [_slices(values, origins, h) for values in (hour_sin, hour_cos, dow_sin, dow_cos)]
    exo += time_windows
    # magnitudes drop the sign of a ±1 encoding; time channels enter the transform in [0, 1]
    exo_cwt += [(w + 1.0) / 2.0 for w in time_windows]

    scales = default_scales(config.n_scales, h)
    endo_series = np.stack(endo, axis=1)
    exo_series = np.stack(exo, axis=1)
    endo_images = np.stack([scalogram_stack(w, scales).transpose(0, 2, 1) for w in endo_cwt], axis=1)
    exo_images = np.stack([scalogram_stack(w, scales).transpose(0, 2, 1) for w in exo_cwt], axis=1)
    targets = _slices(demand.values, origins, horizon)
    last_days = _slices(demand.values, origins - horizon, horizon)

    windows = [
        SampleWindow(timestamps[t], demand.name, endo_images[i], exo_images[i], endo_series[i],
                     exo_series[i], targets[i].copy(), last_days[i].copy(), layout)
        for i, t in enumerate(origins)
    ]
    logger.info(f"DMA {demand.name}: {len(windows)} windows from {windows[0].origin.date()} "
                f"to {windows[-1].origin.date()}")
    return windows


def build_all_features(demand: Dict[str, TimeSeries], weather: WeatherSeries, config: Optional[FeatureConfig] = None,
                       seasonal_fit_end: Optional[pd.Timestamp] = None) -> List[SampleWindow]:
    """Windows of every DMA, sorted by (origin, dma_id)."""
    windows = [w for dma_id in sorted(demand)
               for w in build_features(demand[dma_id], weather, config, seasonal_fit_end)]
    return sorted(windows, key=lambda w: (w.origin, w.dma_id))


def _fit_range(values: np.ndarray, axes: Tuple[int, ...]) -> Tuple[np.ndarray, np.ndarray]:
    return values.min(axis=axes), values.max(axis=axes)


def _apply_range(values: np.ndarray, low: np.ndarray, high: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    low = low.reshape(shape)
    span = (high - low.reshape(-1)).reshape(shape)
    span = np.where(span > 0, span, 1.0)
    return (values - low) / span


@dataclass
class FeatureScaler:
    """
    Per-channel min-max scaling fitted on the training split.

    With ``target_mode='diff24'`` the model target is the day-over-day change
    target − last_day; with ``'level'`` it is the demand itself. A single
    min/max pair scales the target over all hours.
    """
    target_mode: str = "diff24"
    endogenous_low: Optional[np.ndarray] = None
    endogenous_high: Optional[np.ndarray] = None
    exogenous_low: Optional[np.ndarray] = None
    exogenous_high: Optional[np.ndarray] = None
    endogenous_series_low: Optional[np.ndarray] = None
    endogenous_series_high: Optional[np.ndarray] = None
    exogenous_series_low: Optional[np.ndarray] = None
    exogenous_series_high: Optional[np.ndarray] = None
    target_low: float = 0.0
    target_high: float = 1.0

    ARRAY_FIELDS = ("endogenous_low", "endogenous_high", "exogenous_low", "exogenous_high",
                    "endogenous_series_low", "endogenous_series_high",
                    "exogenous_series_low", "exogenous_series_high")

    def __post_init__(self):
        if self.target_mode not in TARGET_MODES:
            raise ContractError(f"FeatureScaler: target_mode must be one of {TARGET_MODES}, got '{self.target_mode}'")

    @property
    def fitted(self) -> bool:
        return self.endogenous_low is not None

    def raw_target(self, target: np.ndarray, last_day: np.ndarray) -> np.ndarray:
        return target - last_day if self.target_mode == "diff24" else np.asarray(target, dtype=np.float64)

    @classmethod
    def fit(cls, windows: Sequence[SampleWindow], target_mode: str = "diff24") -> "FeatureScaler":
        if not windows:
            raise ContractError("FeatureScaler.fit: no training windows")
        scaler = cls(target_mode=target_mode)
        endo = np.stack([w.endogenous for w in windows])
        exo = np.stack([w.exogenous for w in windows])
        scaler.endogenous_low, scaler.endogenous_high = _fit_range(endo, (0, 2, 3))
        scaler.exogenous_low, scaler.exogenous_high = _fit_range(exo, (0, 2, 3))
        scaler.endogenous_series_low, scaler.endogenous_series_high = _fit_range(
            np.stack([w.endogenous_series for w in windows]), (0, 2))
        scaler.exogenous_series_low, scaler.exogenous_series_high = _fit_range(
            np.stack([w.exogenous_series for w in windows]), (0, 2))
        targets = np.stack([scaler.raw_target(w.target, w.last_day) for w in windows])
        scaler.target_low, scaler.target_high = float(targets.min()), float(targets.max())
        return scaler

    def _require_fitted(self):
        if not self.fitted:
            raise ContractError("FeatureScaler used before fit")

    def transform_images(self, endogenous: np.ndarray, exogenous: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        self._require_fitted()
        return (_apply_range(endogenous, self.endogenous_low, self.endogenous_high, (1, -1, 1, 1)),
                _apply_range(exogenous, self.exogenous_low, self.exogenous_high, (1, -1, 1, 1)))

    def transform_series(self, endogenous: np.ndarray, exogenous: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        self._require_fitted()
        return (_apply_range(endogenous, self.endogenous_series_low, self.endogenous_series_high, (1, -1, 1)),
                _apply_range(exogenous, self.exogenous_series_low, self.exogenous_series_high, (1, -1, 1)))

    def _target_span(self) -> float:
        span = self.target_high - self.target_low
        return span if span > 0 else 1.0

    def scale_target(self, target: np.ndarray, last_day: np.ndarray) -> np.ndarray:
        return (self.raw_target(target, last_day) - self.target_low) / self._target_span()

    def unscale_target(self, prediction: np.ndarray, last_day: np.ndarray) -> np.ndarray:
        """Model output back to demand in kWh."""
        values = np.asarray(prediction, dtype=np.float64) * self._target_span() + self.target_low
        return values + last_day if self.target_mode == "diff24" else values

    def to_dict(self) -> dict:
        data = {"target_mode": self.target_mode, "target_low": self.target_low, "target_high": self.target_high}
        for name in self.ARRAY_FIELDS:
            value = getattr(self, name)
            data[name] = None if value is None else [float(v) for v in value]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureScaler":
        arrays = {name: None if data.get(name) is None else np.asarray(data[name], dtype=np.float64)
                  for name in cls.ARRAY_FIELDS}
        return cls(target_mode=data["target_mode"], target_low=float(data["target_low"]),
                   target_high=float(data["target_high"]), **arrays)


@dataclass
class Batch:
    """Scaled model inputs for a set of windows, in window order."""
    endogenous: np.ndarray   # (B, N_c, s, h)
    exogenous: np.ndarray    # (B, N_e, s, h)
    sequence: np.ndarray     # (B, h, N_c + N_e)
    target: np.ndarray       # (B, 24) scaled
    last_day: np.ndarray     # (B, 24) kWh
    actual: np.ndarray       # (B, 24) kWh
    origins: List[pd.Timestamp]
    dma_ids: List[str]

    def __len__(self) -> int:
        return self.target.shape[0]

    @property
    def stack(self) -> np.ndarray:
        return np.concatenate([self.endogenous, self.exogenous], axis=1)

    def take(self, indices: Sequence[int]) -> "Batch":
        indices = np.asarray(indices, dtype=np.int64)
        return Batch(self.endogenous[indices], self.exogenous[indices], self.sequence[indices],
                     self.target[indices], self.last_day[indices], self.actual[indices],
                     [self.origins[i] for i in indices], [self.dma_ids[i] for i in indices])


def make_batch(windows: Sequence[SampleWindow], scaler: FeatureScaler) -> Batch:
    if not windows:
        raise ContractError("make_batch: no windows")
    endo, exo = scaler.transform_images(np.stack([w.endogenous for w in windows]),
                                        np.stack([w.exogenous for w in windows]))
    endo_series, exo_series = scaler.transform_series(np.stack([w.endogenous_series for w in windows]),
                                                      np.stack([w.exogenous_series for w in windows]))
    sequence = np.concatenate([endo_series, exo_series], axis=1).transpose(0, 2, 1)
    actual = np.stack([w.target for w in windows])
    last_day = np.stack([w.last_day for w in windows])
    return Batch(endo, exo, np.ascontiguousarray(sequence), scaler.scale_target(actual, last_day), last_day,
                 actual, [w.origin for w in windows], [w.dma_id for w in windows])


@dataclass(frozen=True)
class SplitSpec:
    test_year: int = 2019
    train_fraction: float = 0.8

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ContractError(f"SplitSpec: train_fraction must lie in (0, 1), got {self.train_fraction}")

    @classmethod
    def from_config(cls, config) -> "SplitSpec":
        return cls(config.get("TEST_YEAR", 2019, var_type=int), config.get("TRAIN_FRACTION", 0.8, var_type=float))

    @property
    def test_start(self) -> pd.Timestamp:
        return pd.Timestamp(year=self.test_year, month=1, day=1, tz="UTC")


def make_splits(windows: Sequence[SampleWindow], spec: SplitSpec) -> Tuple[List[SampleWindow], List[SampleWindow],
                                                                           List[SampleWindow]]:
    """
    (train, val, test): test holds every origin in ``spec.test_year``; the other
    origins are split chronologically, the first ``train_fraction`` of distinct
    origins to train and the rest to validation.
    """
    origins = [w.origin for w in windows]
    if any(later < earlier for earlier, later in zip(origins, origins[1:])):
        raise ContractError("make_splits: windows are not sorted by origin")
    test = [w for w in windows if w.origin.year == spec.test_year]
    if not test:
        raise ContractError(f"make_splits: no windows in test year {spec.test_year}")
    rest = [w for w in windows if w.origin.year != spec.test_year]
    distinct = sorted(set(w.origin for w in rest))
    n_train = math.floor(spec.train_fraction * len(distinct) + 1e-9)
    if n_train == 0 or n_train == len(distinct):
        raise ContractError(f"make_splits: {len(distinct)} non-test origins cannot be split into "
                            f"non-empty train and validation sets")
    boundary = distinct[n_train]
    train = [w for w in rest if w.origin < boundary]
    val = [w for w in rest if w.origin >= boundary]
    logger.info(f"Split {len(windows)} windows: train={len(train)} val={len(val)} test={len(test)}")
    return train, val, test
