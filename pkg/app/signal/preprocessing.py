# app/signal/preprocessing.py
import logging
import math
from typing import Tuple, Union

import numpy as np
import pandas as pd

from app.core.exceptions import ContractError, DomainError
from app.signal.timeseries import UNIT_KWH, TimeSeries
from app.utils import constants

logger = logging.getLogger(__name__)

MAD_TO_SIGMA = 1.4826
DEFAULT_OUTLIER_WINDOW = 169
DEFAULT_MAX_GAP = 6


def difference(series, lag: int) -> np.ndarray:
    """out[i] = series[i + lag] − series[i]"""
    values = np.asarray(series, dtype=np.float64).reshape(-1)
    if lag < 1:
        raise ContractError(f"difference: lag must be positive, got {lag}")
    if values.size <= lag:
        raise ContractError(f"difference: series of length {values.size} not longer than lag {lag}")
    return values[lag:] - values[:-lag]


def invert_difference(diffs, seed, lag: int) -> np.ndarray:
    """Rebuilds the series from its lag differences and its first ``lag`` values."""
    diffs = np.asarray(diffs, dtype=np.float64).reshape(-1)
    seed = np.asarray(seed, dtype=np.float64).reshape(-1)
    if lag < 1:
        raise ContractError(f"invert_difference: lag must be positive, got {lag}")
    if seed.size != lag:
        raise ContractError(f"invert_difference: seed has {seed.size} values, lag is {lag}")
    out = np.empty(diffs.size + lag)
    out[:lag] = seed
    for residue in range(lag):
        out[lag + residue::lag] = seed[residue] + np.cumsum(diffs[residue::lag])
    return out


def cyclical_encode(value: Union[float, np.ndarray], period: float) -> Tuple:
    if period <= 0:
        raise DomainError(f"cyclical_encode: period must be positive, got {period}")
    angle = 2.0 * math.pi * np.asarray(value, dtype=np.float64) / period
    sin, cos = np.sin(angle), np.cos(angle)
    if sin.ndim == 0:
        return float(sin), float(cos)
    return sin, cos


def remove_outliers(series: TimeSeries, z_threshold: float = 5.0,
                    window: int = DEFAULT_OUTLIER_WINDOW) -> Tuple[TimeSeries, np.ndarray]:
    """
    Marks points far from the local level as missing.

    A point is an outlier when |x − median| > z_threshold · σ, where median is
    the centered rolling median over ``window`` hours and σ is 1.4826 times the
    centered rolling median of |x − median| over the same window.

    Returns:
        (series with outliers set to NaN, boolean mask of removed points)
    """
    if z_threshold <= 0:
        raise ContractError(f"remove_outliers: z_threshold must be positive, got {z_threshold}")
    values = series.values
    observed = ~np.isnan(values)
    if not observed.any():
        raise ContractError(f"remove_outliers: series '{series.name}' has no observed values")

    frame = pd.Series(values)
    median = frame.rolling(window, center=True, min_periods=1).median()
    deviation = (frame - median).abs()
    sigma = MAD_TO_SIGMA * deviation.rolling(window, center=True, min_periods=1).median()
    mask = (deviation > z_threshold * sigma).to_numpy() & observed

    cleaned = values.copy()
    cleaned[mask] = np.nan
    if mask.any():
        logger.info(f"Removed {int(mask.sum())} outliers from '{series.name}'")
    return series.with_values(cleaned), mask


def impute_missing(series: TimeSeries, max_gap: int = DEFAULT_MAX_GAP) -> TimeSeries:
    """
    Fills every missing hour.

    Negative consumption counts as missing for kWh series. Interior gaps of at
    most ``max_gap`` hours are linearly interpolated; any other missing hour
    takes the value one week earlier, else one day earlier, else the series mean.
    """
    if len(series) == 0:
        raise ContractError("impute_missing: empty series")
    series = series.regularized()
    values = series.values.copy()
    if series.unit == UNIT_KWH:
        values[values < 0] = np.nan
    missing = np.isnan(values)
    if missing.all():
        raise ContractError(f"impute_missing: series '{series.name}' has no observed values")
    if not missing.any():
        return series.with_values(values)

    fallback = float(values[~missing].mean())
    n = values.size
    start = 0
    filled_by_lag = 0
    while start < n:
        if not np.isnan(values[start]):
            start += 1
            continue
        stop = start
        while stop < n and np.isnan(values[stop]):
            stop += 1
        length = stop - start
        if length <= max_gap and start > 0 and stop < n:
            left, right = values[start - 1], values[stop]
            steps = np.arange(1, length + 1) / (length + 1)
            values[start:stop] = left + (right - left) * steps
        else:
            for k in range(start, stop):
                for lag in (constants.HOURS_PER_WEEK, 24):
                    if k - lag >= 0 and not np.isnan(values[k - lag]):
                        values[k] = values[k - lag]
                        break
                else:
                    values[k] = fallback
            filled_by_lag += length
        start = stop

    logger.debug(f"Imputed {int(missing.sum())} hours of '{series.name}' ({filled_by_lag} from lagged values)")
    return series.with_values(values)
