import math

import numpy as np
import pandas as pd
import pytest

from app.core.exceptions import ContractError, DimensionError, DomainError
from app.signal import (TimeSeries, UNIT_CELSIUS, cwt_scalogram, cyclical_encode, default_scales, difference,
                        expanding_position_means, impute_missing, invert_difference, moving_average_filter, morlet,
                        pseudo_period, remove_outliers, scalogram_stack, seasonal_decompose)


def brute_force_scalogram(x, scales, omega0=6.0):
    h = len(x)
    grid = np.zeros((h, len(scales)))
    for b in range(h):
        for j, a in enumerate(scales):
            total = 0.0
            for t in range(h):
                u = (t - b) / a
                total += x[t] * math.exp(-u * u / 2) * math.cos(omega0 * u) / math.sqrt(a)
            grid[b, j] = abs(total)
    return grid


# --- wavelet ---

def test_default_scales_span_two_hours_to_two_windows():
    scales = default_scales(24, 24)
    assert scales.shape == (24,)
    assert np.all(np.diff(scales) > 0)
    np.testing.assert_allclose(pseudo_period(scales[[0, -1]]), [2.0, 48.0])
    ratios = scales[1:] / scales[:-1]
    np.testing.assert_allclose(ratios, ratios[0])


def test_default_scales_edge_counts():
    assert default_scales(1).shape == (1,)
    with pytest.raises(ContractError):
        default_scales(0)


def test_impulse_scalogram_is_the_wavelet(rng):
    scales = default_scales(6, 12)
    x = np.zeros(12)
    x[5] = 1.0
    grid = cwt_scalogram(x, scales).grid
    for b in range(12):
        for j, a in enumerate(scales):
            assert grid[b, j] == pytest.approx(abs(morlet((5 - b) / a)) / math.sqrt(a), abs=1e-12)


def test_sinusoid_matches_direct_sum():
    x = np.sin(2 * np.pi * np.arange(24) / 8.0) + 0.3 * np.cos(2 * np.pi * np.arange(24) / 24.0)
    scalogram = cwt_scalogram(x)
    assert scalogram.shape == (24, 24)
    np.testing.assert_allclose(scalogram.grid, brute_force_scalogram(x, scalogram.scales), rtol=1e-10, atol=1e-12)


def test_period_twelve_peaks_at_the_nearest_scale():
    t = np.arange(480)
    scales = default_scales(24, 24)
    grid = cwt_scalogram(np.cos(2 * np.pi * t / 12.0), scales).grid
    nearest = int(np.argmin(np.abs(1.0 / pseudo_period(scales) - 1.0 / 12.0)))
    # interior positions, clear of the largest wavelet's support
    energy = (grid[160:320] ** 2).sum(axis=0)
    assert int(np.argmax(energy)) == nearest
    for b in range(162, 320, 6):
        assert int(np.argmax(grid[b])) == nearest, b


def test_scalogram_scales_with_magnitude(rng):
    x = rng.normal(size=24)
    base = cwt_scalogram(x).grid
    np.testing.assert_allclose(cwt_scalogram(-3.0 * x).grid, 3.0 * base, rtol=1e-12)
    np.testing.assert_allclose(cwt_scalogram(np.zeros(24)).grid, 0.0)


def test_scalogram_stack_matches_single_windows(rng):
    windows = rng.normal(size=(4, 24))
    stack = scalogram_stack(windows)
    assert stack.shape == (4, 24, 24)
    for m in range(4):
        np.testing.assert_allclose(stack[m], cwt_scalogram(windows[m]).grid, rtol=1e-12)


@pytest.mark.parametrize("window,scales,wavelet,error", [
    ([], None, "morlet", ContractError),
    ([1.0, np.nan, 2.0], None, "morlet", ContractError),
    ([1.0, 2.0, 3.0], [2.0, 1.0], "morlet", DomainError),
    ([1.0, 2.0, 3.0], [0.0, 1.0], "morlet", DomainError),
    ([1.0, 2.0, 3.0], [], "morlet", ContractError),
    ([1.0, 2.0, 3.0], None, "mexican_hat", DomainError),
])
def test_cwt_rejects_bad_input(window, scales, wavelet, error):
    with pytest.raises(error):
        cwt_scalogram(window, scales, wavelet)


# --- decomposition ---

@pytest.mark.parametrize("period", [24, 7])
def test_decomposition_recovers_linear_trend_and_pattern(period):
    n = 6 * period
    pattern = np.sin(2 * np.pi * np.arange(period) / period) + np.cos(4 * np.pi * np.arange(period) / period)
    pattern -= pattern.mean()
    t = np.arange(n, dtype=np.float64)
    result = seasonal_decompose(0.5 * t + 10.0 + np.resize(pattern, n), period)

    half = period // 2
    assert not result.mask[:half].any() and not result.mask[n - half:].any()
    assert result.mask[half:n - half].all()
    np.testing.assert_allclose(result.trend[result.mask], 0.5 * t[result.mask] + 10.0, atol=1e-9)
    np.testing.assert_allclose(result.seasonal, np.resize(pattern, n), atol=1e-9)
    np.testing.assert_allclose(result.residual[result.mask], 0.0, atol=1e-9)


def test_decomposition_components_add_up(rng):
    x = rng.normal(size=24 * 10) + np.resize(np.arange(24.0), 240)
    result = seasonal_decompose(TimeSeries.hourly("2019-01-01", x), 24)
    m = result.mask
    np.testing.assert_allclose(result.trend[m] + result.seasonal[m] + result.residual[m], x[m], atol=1e-12)
    np.testing.assert_allclose(result.seasonal[:24], result.seasonal[24:48])
    assert abs(result.seasonal[:24].sum()) < 1e-9


def test_constant_series_has_no_seasonal_or_residual():
    result = seasonal_decompose(np.full(24 * 5, 7.25), 24)
    m = result.mask
    np.testing.assert_allclose(result.trend[m], 7.25, atol=1e-12)
    np.testing.assert_allclose(result.seasonal, 0.0, atol=1e-12)
    np.testing.assert_allclose(result.residual[m], 0.0, atol=1e-12)


def test_expanding_position_means_only_use_data_below_the_cutoff(rng):
    x = rng.normal(size=24 * 8) + np.resize(np.arange(24.0), 24 * 8)
    result = seasonal_decompose(x, 24)
    means = expanding_position_means(result, [20, 24 * 4, x.size])
    assert np.isnan(means[0]).all()
    np.testing.assert_allclose(means[2], result.seasonal[:24], atol=1e-12)
    assert abs(means[1].sum()) < 1e-9

    changed = x.copy()
    changed[24 * 4 + 12:] += rng.normal(size=changed.size - 24 * 4 - 12) * 50.0
    later = expanding_position_means(seasonal_decompose(changed, 24), [24 * 4])
    np.testing.assert_allclose(later[0], means[1], atol=1e-12)
    with pytest.raises(ContractError):
        expanding_position_means(result, [x.size + 1])


def test_moving_average_filter_even_and_odd():
    even = moving_average_filter(4)
    np.testing.assert_allclose(even, [0.125, 0.25, 0.25, 0.25, 0.125])
    np.testing.assert_allclose(moving_average_filter(3), [1 / 3] * 3)


@pytest.mark.parametrize("values,period", [
    (np.ones(47), 24),
    (np.ones(48), 0),
    (np.r_[np.ones(47), np.nan], 24),
])
def test_decomposition_rejects_bad_input(values, period):
    with pytest.raises(ContractError):
        seasonal_decompose(values, period)


# --- preprocessing ---

def test_difference_inverts(rng):
    x = rng.normal(size=50)
    d = difference(x, 24)
    assert d.shape == (26,)
    assert d[3] == x[27] - x[3]
    np.testing.assert_allclose(invert_difference(d, x[:24], 24), x, atol=1e-12)


def test_difference_contract():
    with pytest.raises(ContractError):
        difference([1.0, 2.0], 0)
    with pytest.raises(ContractError):
        difference([1.0, 2.0], 2)
    with pytest.raises(ContractError):
        invert_difference([1.0], [1.0, 2.0], 3)


def test_cyclical_encode():
    sin, cos = cyclical_encode(6, 24)
    assert sin == pytest.approx(1.0) and cos == pytest.approx(0.0, abs=1e-12)
    sin, cos = cyclical_encode(np.arange(7), 7)
    np.testing.assert_allclose(sin ** 2 + cos ** 2, 1.0)
    with pytest.raises(DomainError):
        cyclical_encode(1.0, 0)


def brute_force_outliers(x, z, window):
    n, half = len(x), window // 2

    def rolling_median(v):
        return np.array([np.median(v[max(0, i - half):min(n, i + half + 1)]) for i in range(n)])

    median = rolling_median(x)
    deviation = np.abs(x - median)
    sigma = 1.4826 * rolling_median(deviation)
    return deviation > z * sigma


@pytest.mark.parametrize("seed", range(5))
def test_outlier_mask_matches_rolling_median_rule(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=80)
    x[rng.choice(80, 4, replace=False)] += rng.choice([-1, 1], 4) * 12.0
    series = TimeSeries.hourly("2019-01-01", x)
    cleaned, mask = remove_outliers(series, z_threshold=3.0, window=11)
    np.testing.assert_array_equal(mask, brute_force_outliers(x, 3.0, 11))
    assert np.isnan(cleaned.values[mask]).all()
    np.testing.assert_array_equal(cleaned.values[~mask], x[~mask])


def test_outlier_spike_on_constant_series():
    x = np.full(200, 5.0)
    x[100] = 50.0
    _, mask = remove_outliers(TimeSeries.hourly("2019-01-01", x))
    assert np.flatnonzero(mask).tolist() == [100]


def test_outlier_contract():
    series = TimeSeries.hourly("2019-01-01", [np.nan, np.nan])
    with pytest.raises(ContractError):
        remove_outliers(series)
    with pytest.raises(ContractError):
        remove_outliers(TimeSeries.hourly("2019-01-01", [1.0]), z_threshold=0)


def test_impute_short_gap_interpolates():
    x = np.arange(30, dtype=np.float64)
    x[10:13] = np.nan
    filled = impute_missing(TimeSeries.hourly("2019-01-01", x))
    np.testing.assert_allclose(filled.values, np.arange(30.0))


def test_impute_long_gap_uses_week_then_day():
    x = 100.0 + np.arange(400, dtype=np.float64)
    x[300:310] = np.nan
    x[30:40] = np.nan
    filled = impute_missing(TimeSeries.hourly("2019-01-01", x), max_gap=6).values
    np.testing.assert_allclose(filled[300:310], 100.0 + np.arange(300 - 168, 310 - 168))
    np.testing.assert_allclose(filled[30:40], 100.0 + np.arange(30 - 24, 40 - 24))


def test_impute_edge_gap_without_history_uses_mean():
    x = np.r_[np.full(3, np.nan), np.ones(10) * 4.0]
    filled = impute_missing(TimeSeries.hourly("2019-01-01", x)).values
    np.testing.assert_allclose(filled, 4.0)


def test_impute_negative_consumption_but_not_temperature():
    x = np.array([1.0, 2.0, -5.0, 4.0, 5.0])
    np.testing.assert_allclose(impute_missing(TimeSeries.hourly("2019-01-01", x)).values, [1, 2, 3, 4, 5])
    temp = TimeSeries.hourly("2019-01-01", x, unit=UNIT_CELSIUS)
    np.testing.assert_allclose(impute_missing(temp).values, x)


def test_impute_regularizes_and_rejects_all_missing():
    stamps = pd.DatetimeIndex(["2019-01-01 00:00", "2019-01-01 01:00", "2019-01-01 03:00"], tz="UTC")
    filled = impute_missing(TimeSeries(stamps, [1.0, 2.0, 4.0]))
    assert len(filled) == 4 and filled.is_regular()
    assert filled.values[2] == pytest.approx(3.0)
    with pytest.raises(ContractError):
        impute_missing(TimeSeries.hourly("2019-01-01", [np.nan] * 3))


def test_timeseries_length_mismatch():
    with pytest.raises(DimensionError):
        TimeSeries(pd.date_range("2019-01-01", periods=3, freq="h", tz="UTC"), [1.0, 2.0])
