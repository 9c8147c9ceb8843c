import json

import pytest

from app.main import run_application
from app.utils import constants

pytestmark = pytest.mark.slow

SETTINGS = "SYNTH_START = 2016-01-01\nN_DAYS = 1827\nDMA_COUNT = 3\nTEST_YEAR = 2019\n"


def run(workdir, settings, *args):
    return run_application(list(args) + ["--config", str(settings), "--workdir", str(workdir)])


def mape_of(workdir, kind):
    with open(workdir / constants.METRICS_TEMPLATE.format(kind=kind)) as f:
        metrics = json.load(f)
    return metrics[kind]["aggregate"]["mape_mean"], metrics["persistence"]["aggregate"]["mape_mean"]


@pytest.fixture(scope="module")
def five_years(tmp_path_factory):
    workdir = tmp_path_factory.mktemp("five_years")
    settings = workdir / "run.env"
    settings.write_text(SETTINGS)
    for step in (["synth"], ["preprocess"], ["train", "--model", "f"], ["train", "--model", "fprime"],
                 ["evaluate", "--model", "f"], ["evaluate", "--model", "fprime"]):
        assert run(workdir, settings, *step) == constants.EXIT_OK, step
    return workdir


def test_desk_fprime_beats_persistence_and_keeps_up_with_f(five_years):
    f_mape, persistence = mape_of(five_years, "f")
    fprime_mape, _ = mape_of(five_years, "fprime")
    assert fprime_mape <= 0.9 * persistence, (fprime_mape, persistence)
    assert fprime_mape <= 1.1 * f_mape, (fprime_mape, f_mape)
