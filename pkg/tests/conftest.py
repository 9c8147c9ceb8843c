import os
import sys

import numpy as np
import pandas as pd
import pytest

project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from app.services.synthetic import SynthConfig, synth_generate  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_dataset():
    """Two DMAs over December 2018 and January 2019: train/val in 2018, test in 2019."""
    return synth_generate(SynthConfig(seed=7, n_days=62, dma_count=2, start="2018-12-01"))


@pytest.fixture
def hourly_index():
    def make(n, start="2019-01-01"):
        return pd.date_range(start, periods=n, freq="h", tz="UTC")
    return make


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full five-year synthetic runs (deselect with -m 'not slow')")
