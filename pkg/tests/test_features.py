import dataclasses

import numpy as np
import pandas as pd
import pytest

from app.core.exceptions import ContractError
from app.services.features import (FeatureConfig, FeatureScaler, SplitSpec, build_all_features, build_features,
                                   make_batch, make_splits)
from app.services.ingest import WeatherSeries
from app.services.synthetic import SynthConfig, synth_generate
from app.signal import TimeSeries, cwt_scalogram


@pytest.fixture(scope="module")
def three_weeks():
    demand, weather = synth_generate(SynthConfig(seed=3, n_days=21, dma_count=1, start="2019-02-04"))
    return demand["DMA01"], weather


@pytest.fixture(scope="module")
def small_windows(small_dataset):
    demand, weather = small_dataset
    return build_all_features(demand, weather)


def test_default_layout_channel_counts():
    layout = FeatureConfig().layout()
    assert layout.n_endogenous == 5
    assert len(layout.weather) == 4 and len(layout.time) == 4
    assert layout.endogenous[:2] == ("demand_lag24", "demand_lag168")
    plain = FeatureConfig(use_decomposition=False).layout()
    assert (plain.n_endogenous, len(plain.weather), len(plain.time)) == (2, 2, 4)


@pytest.mark.parametrize("kwargs", [{"lags": (12,)}, {"lags": ()}, {"demand_cwt_mode": "log"},
                                    {"decomposition_period": 1}])
def test_feature_config_contract(kwargs):
    with pytest.raises(ContractError):
        FeatureConfig(**kwargs)


def test_windows_start_one_week_in_and_cover_the_series(three_weeks):
    demand, weather = three_weeks
    windows = build_features(demand, weather)
    start = demand.timestamps[0]
    assert windows[0].origin == start + pd.Timedelta(days=7)
    assert windows[-1].origin == start + pd.Timedelta(days=20)
    assert all(w.origin.hour == 0 for w in windows)


def test_window_contents(three_weeks):
    demand, weather = three_weeks
    windows = build_features(demand, weather)
    values = demand.values
    for w in windows[::4]:
        t = demand.timestamps.get_loc(w.origin)
        assert w.endogenous.shape == (5, 24, 24)
        assert w.exogenous.shape == (8, 24, 24)
        np.testing.assert_array_equal(w.target, values[t:t + 24])
        np.testing.assert_array_equal(w.last_day, values[t - 24:t])
        np.testing.assert_array_equal(w.endogenous_series[0], values[t - 24:t])
        np.testing.assert_array_equal(w.endogenous_series[1], values[t - 168:t - 144])
        np.testing.assert_array_equal(w.exogenous_series[0], weather.max_temp.values[t:t + 24])
        lag = values[t - 24:t]
        expected = cwt_scalogram(np.diff(lag, prepend=lag[0])).grid.T
        np.testing.assert_allclose(w.endogenous[0], expected, rtol=1e-12)
        np.testing.assert_allclose(w.exogenous[0], cwt_scalogram(weather.max_temp.values[t:t + 24]).grid.T,
                                   rtol=1e-12)


def test_weekday_scalograms_tell_every_day_apart(three_weeks):
    demand, weather = three_weeks
    windows = build_features(demand, weather)[:7]
    exogenous = FeatureConfig().layout().exogenous
    days = [exogenous.index("dow_sin"), exogenous.index("dow_cos")]
    assert sorted(w.origin.dayofweek for w in windows) == list(range(7))
    images = [w.exogenous[days] for w in windows]
    for i in range(7):
        for j in range(i + 1, 7):
            assert not np.allclose(images[i], images[j], atol=1e-6), (windows[i].origin, windows[j].origin)


def test_features_do_not_see_the_forecast_day(three_weeks):
    demand, weather = three_weeks
    before = build_features(demand, weather)[3]
    t = demand.timestamps.get_loc(before.origin)
    changed = demand.values.copy()
    changed[t:] += 100.0
    later_temp = weather.max_temp.values.copy()
    later_temp[t + 24:] -= 30.0
    changed_weather = WeatherSeries(weather.max_temp.with_values(later_temp), weather.feels_like)
    after = build_features(demand.with_values(changed), changed_weather)[3]
    assert after.origin == before.origin
    # every channel, components included
    np.testing.assert_allclose(after.endogenous_series, before.endogenous_series, rtol=1e-12, atol=1e-9)
    np.testing.assert_allclose(after.endogenous, before.endogenous, rtol=1e-12, atol=1e-9)
    np.testing.assert_allclose(after.exogenous_series, before.exogenous_series, rtol=1e-12, atol=1e-9)
    np.testing.assert_allclose(after.exogenous, before.exogenous, rtol=1e-12, atol=1e-9)
    np.testing.assert_array_equal(after.last_day, before.last_day)


def test_test_year_data_does_not_reach_earlier_windows_or_seasonal_patterns(small_dataset):
    demand, weather = small_dataset
    fit_end = SplitSpec(test_year=2019).test_start
    series = demand["DMA01"]
    later = series.timestamps >= fit_end
    wave = np.where(later, 5.0 * np.sin(2 * np.pi * np.arange(len(series)) / 24), 0.0)
    changed_weather = WeatherSeries(weather.max_temp.with_values(weather.max_temp.values + wave), weather.feels_like)
    before = build_features(series, weather, seasonal_fit_end=fit_end)
    after = build_features(series.with_values(series.values + wave), changed_weather, seasonal_fit_end=fit_end)
    assert [w.origin for w in before] == [w.origin for w in after]
    seasonal = FeatureConfig().layout().endogenous.index("demand_seasonal")
    checked_early = checked_late = 0
    for b, a in zip(before, after):
        if b.origin + pd.Timedelta(days=2) <= fit_end:
            np.testing.assert_allclose(a.endogenous_series, b.endogenous_series, rtol=1e-12, atol=1e-9)
            np.testing.assert_allclose(a.exogenous_series, b.exogenous_series, rtol=1e-12, atol=1e-9)
            np.testing.assert_allclose(a.endogenous, b.endogenous, rtol=1e-12, atol=1e-9)
            checked_early += 1
        elif b.origin >= fit_end:
            np.testing.assert_allclose(a.endogenous_series[seasonal], b.endogenous_series[seasonal], atol=1e-9)
            checked_late += 1
    assert checked_early > 0 and checked_late > 0


def test_components_add_up_to_the_observed_window(three_weeks):
    demand, weather = three_weeks
    layout = FeatureConfig().layout()
    first = layout.endogenous.index("demand_trend")
    for w in build_features(demand, weather)[::3]:
        t = demand.timestamps.get_loc(w.origin)
        observed = demand.values[t - 12 - 24:t - 12]
        np.testing.assert_allclose(w.endogenous_series[first:first + 3].sum(axis=0), observed, atol=1e-9)


def test_time_channels_encode_hour_and_weekday(three_weeks):
    demand, weather = three_weeks
    w = build_features(demand, weather)[0]
    hour_sin = w.exogenous_series[4]
    np.testing.assert_allclose(hour_sin, np.sin(2 * np.pi * np.arange(24) / 24), atol=1e-12)
    dow_sin = w.exogenous_series[6]
    np.testing.assert_allclose(dow_sin, np.sin(2 * np.pi * w.origin.dayofweek / 7))


def test_misaligned_or_missing_inputs_are_rejected(three_weeks):
    demand, weather = three_weeks
    shifted = WeatherSeries(*(TimeSeries(s.timestamps + pd.Timedelta(hours=1), s.values, s.unit, s.name)
                              for s in (weather.max_temp, weather.feels_like)))
    with pytest.raises(ContractError, match="first mismatched hour"):
        build_features(demand, shifted)
    gappy = demand.values.copy()
    gappy[100] = np.nan
    with pytest.raises(ContractError):
        build_features(demand.with_values(gappy), weather)


def test_too_short_series_has_no_windows():
    demand, weather = synth_generate(SynthConfig(n_days=21, dma_count=1))
    cut = demand["DMA01"].timestamps[24 * 8 - 2]
    with pytest.raises(ContractError):
        build_features(demand["DMA01"].restrict(demand["DMA01"].timestamps[0], cut),
                       weather.restrict(weather.timestamps[0], cut))


def test_all_features_are_sorted_by_origin_then_dma(small_windows):
    keys = [(w.origin, w.dma_id) for w in small_windows]
    assert keys == sorted(keys)
    assert {w.dma_id for w in small_windows} == {"DMA01", "DMA02"}


def test_splits_are_chronological(small_windows):
    train, val, test = make_splits(small_windows, SplitSpec(test_year=2019, train_fraction=0.8))
    assert (len(train), len(val), len(test)) == (38, 10, 62)
    assert all(w.origin.year == 2019 for w in test)
    assert max(w.origin for w in train) < min(w.origin for w in val)
    assert max(w.origin for w in val) < min(w.origin for w in test)


def test_split_contract(small_windows):
    with pytest.raises(ContractError):
        make_splits(small_windows, SplitSpec(test_year=2017))
    with pytest.raises(ContractError):
        make_splits(list(reversed(small_windows)), SplitSpec())
    with pytest.raises(ContractError):
        SplitSpec(train_fraction=1.0)
    with pytest.raises(ContractError):
        make_splits(small_windows, SplitSpec(train_fraction=0.01))


def test_five_year_split_keeps_the_test_year_apart():
    demand, weather = synth_generate(SynthConfig(seed=5, n_days=1827, dma_count=1, start="2016-01-01"))
    spec = SplitSpec(test_year=2019, train_fraction=0.8)
    windows = build_all_features(demand, weather, seasonal_fit_end=spec.test_start)
    train, val, test = make_splits(windows, spec)
    origins = [{w.origin for w in split} for split in (train, val, test)]
    assert {o.year for o in origins[2]} == {2019}
    assert len(origins[2]) == 365
    assert all(o.year != 2019 for o in origins[0] | origins[1])
    assert not (origins[0] & origins[1]) and not (origins[0] & origins[2]) and not (origins[1] & origins[2])
    assert sum(len(s) for s in origins) == len(windows)
    assert max(origins[0]) < min(origins[1])
    rest = len(origins[0]) + len(origins[1])
    assert len(origins[0]) == int(np.floor(0.8 * rest + 1e-9))


@pytest.mark.parametrize("target_mode", ["diff24", "level"])
def test_scaler_maps_training_data_into_unit_range(small_windows, target_mode):
    train, _, test = make_splits(small_windows, SplitSpec())
    scaler = FeatureScaler.fit(train, target_mode)
    batch = make_batch(train, scaler)
    for array in (batch.endogenous, batch.exogenous, batch.sequence, batch.target):
        assert array.min() >= -1e-12 and array.max() <= 1 + 1e-12
    assert batch.sequence.shape == (len(train), 24, 13)
    assert batch.stack.shape == (len(train), 13, 24, 24)
    np.testing.assert_allclose(scaler.unscale_target(batch.target, batch.last_day), batch.actual, rtol=1e-10)
    restored = FeatureScaler.from_dict(scaler.to_dict())
    np.testing.assert_array_equal(make_batch(test, restored).endogenous, make_batch(test, scaler).endogenous)


def test_constant_channel_scales_without_division_by_zero(small_windows):
    windows = small_windows[:4]
    flat = [dataclasses.replace(w, exogenous_series=np.ones_like(w.exogenous_series)) for w in windows]
    batch = make_batch(flat, FeatureScaler.fit(flat))
    assert np.isfinite(batch.sequence).all()


def test_batch_take_keeps_rows_together(small_windows):
    batch = make_batch(small_windows[:6], FeatureScaler.fit(small_windows[:6]))
    part = batch.take([4, 1])
    assert part.dma_ids == [batch.dma_ids[4], batch.dma_ids[1]]
    np.testing.assert_array_equal(part.target[0], batch.target[4])
    assert len(part) == 2
