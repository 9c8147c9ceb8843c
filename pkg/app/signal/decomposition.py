# app/signal/decomposition.py
"""Classical additive seasonal decomposition (centered moving-average trend)."""
import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from app.core.exceptions import ContractError
from app.signal.timeseries import TimeSeries

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DecompositionResult:
    """
    trend + seasonal + residual == observed where ``mask`` is true.

    trend and residual are NaN outside the mask; seasonal is defined
    everywhere and repeats with ``period``.
    """
    observed: np.ndarray
    trend: np.ndarray
    seasonal: np.ndarray
    residual: np.ndarray
    period: int
    mask: np.ndarray


def moving_average_filter(period: int) -> np.ndarray:
    """Centered weights; even periods use the averaged pair of windows (2×period MA)."""
    if period % 2 == 0:
        weights = np.ones(period + 1)
        weights[0] = weights[-1] = 0.5
    else:
        weights = np.ones(period)
    return weights / period


def seasonal_decompose(series: Union[TimeSeries, np.ndarray], period: int) -> DecompositionResult:
    values = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    n = values.size
    if period < 1:
        raise ContractError(f"seasonal_decompose: period must be positive, got {period}")
    if n < 2 * period:
        raise ContractError(f"seasonal_decompose: series of length {n} shorter than two periods ({2 * period})")
    if np.any(np.isnan(values)):
        raise ContractError("seasonal_decompose: series contains missing values; impute first")

    weights = moving_average_filter(period)
    half = weights.size // 2
    trend = np.full(n, np.nan)
    trend[half:n - half] = np.convolve(values, weights, mode="valid")
    mask = ~np.isnan(trend)

    detrended = values - trend
    position_means = np.array([np.nanmean(detrended[p::period]) for p in range(period)])
    position_means -= position_means.mean()
    seasonal = np.resize(position_means, n)
    residual = values - trend - seasonal

    logger.debug(f"Decomposed {n} points with period {period}; trend defined on {int(mask.sum())} points")
    return DecompositionResult(values.copy(), trend, seasonal, residual, period, mask)


def expanding_position_means(result: DecompositionResult, cutoffs: Sequence[int]) -> np.ndarray:
    """
    Seasonal patterns available at each cutoff: row k holds the centered
    per-position means of the detrended series over indices below
    ``cutoffs[k]``, indexed by absolute position modulo the period.

    Rows whose data does not yet cover every position are NaN.
    """
    period = result.period
    n = result.observed.size
    cutoffs = np.asarray(cutoffs, dtype=np.int64).reshape(-1)
    if np.any((cutoffs < 0) | (cutoffs > n)):
        raise ContractError(f"expanding_position_means: cutoffs must lie in [0, {n}]")
    index = np.arange(n)
    sums = np.zeros((n + 1, period))
    counts = np.zeros((n + 1, period))
    sums[index + 1, index % period] = np.where(result.mask, result.observed - result.trend, 0.0)
    counts[index + 1, index % period] = result.mask
    sums = np.cumsum(sums, axis=0)[cutoffs]
    counts = np.cumsum(counts, axis=0)[cutoffs]
    with np.errstate(invalid="ignore", divide="ignore"):
        means = sums / counts
    return means - means.mean(axis=1, keepdims=True)
