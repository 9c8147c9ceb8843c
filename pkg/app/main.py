# app/main.py
import argparse
import logging
import os
import sys
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

# Ensure the project root is in sys.path
project_root_main = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
if project_root_main not in sys.path:
    sys.path.insert(0, project_root_main)

from app.core.config import Config
from app.core.exceptions import DataFormatError, HeatcastError, UsageError
from app.core.logger_config import setup_logging
from app.models import (ForecastModel, apply_model_hyperparameters, build_model, load_checkpoint, model_config,
                        save_checkpoint)
from app.services import evaluation, training
from app.services.features import FeatureConfig, SplitSpec, make_batch
from app.services.ingest import aggregate_dma, format_timestamp, ingest_meter_csv, ingest_weather_csv, weather_series
from app.services.pipeline import (PreparedData, PreprocessConfig, align, decomposition_rows, preprocess_demand,
                                   preprocess_weather, prepare_data, read_demand_csv, read_weather_csv,
                                   write_demand_csv, write_meter_csv, write_weather_csv)
from app.services.synthetic import SynthConfig, synth_generate
from app.signal.decomposition import seasonal_decompose
from app.signal.timeseries import TimeSeries
from app.utils import constants
from app.utils.csv_handler import CSVHandler, load_csv_to_dataframe

logger = logging.getLogger(__name__)

COMMANDS = ("synth", "preprocess", "decompose", "train", "evaluate", "forecast", "plot-data")


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting with status 2."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class TrainOutcome:
    model: ForecastModel
    history: training.TrainHistory

    @property
    def val_loss(self) -> float:
        return self.history.best_val_loss


# ---- helpers ----

def _workdir(args, config: Config) -> str:
    return args.workdir or str(config.get("DATA_PATH", "data"))


def _path(workdir: str, name: str) -> str:
    return os.path.join(workdir, name)


def _kinds(args, workdir: str) -> List[str]:
    """--model if given, else every kind with a checkpoint in the work directory."""
    if getattr(args, "model", None):
        return [args.model]
    kinds = [k for k in constants.MODEL_KINDS
             if os.path.exists(_path(workdir, constants.CHECKPOINT_TEMPLATE.format(kind=k)))]
    if not kinds:
        raise DataFormatError("no trained model checkpoints found; run 'train --model ...' first", path=workdir)
    return kinds


def load_prepared(config: Config, workdir: str) -> PreparedData:
    demand = read_demand_csv(_path(workdir, constants.DEFAULT_DEMAND_CLEAN_CSV))
    weather = read_weather_csv(_path(workdir, constants.DEFAULT_WEATHER_CLEAN_CSV))
    demand, weather = align(demand, weather)
    return prepare_data(demand, weather, FeatureConfig.from_config(config), SplitSpec.from_config(config),
                        str(config.get("TARGET_MODE", "diff24")))


# ---- Command implementations ----

def cmd_synth(args, config: Config) -> int:
    """Generate the seeded synthetic meter and weather CSVs"""
    workdir = _workdir(args, config)
    synth_config = SynthConfig.from_config(config)
    demand, weather = synth_generate(synth_config)
    write_meter_csv(demand, _path(workdir, constants.DEFAULT_METER_CSV))
    write_weather_csv(weather, _path(workdir, constants.DEFAULT_WEATHER_CSV))
    logger.info(f"Synthetic data for {len(demand)} DMAs written to {workdir}")
    return constants.EXIT_OK


def cmd_preprocess(args, config: Config) -> int:
    """Ingest raw CSVs, aggregate per DMA, remove outliers, impute and align"""
    workdir = _workdir(args, config)
    handler = CSVHandler(workdir)
    meters_path = args.meters or _path(workdir, constants.DEFAULT_METER_CSV)
    weather_path = args.weather or _path(workdir, constants.DEFAULT_WEATHER_CSV)
    readings, meter_errors = ingest_meter_csv(meters_path)
    records, weather_errors = ingest_weather_csv(weather_path)
    errors = [("meters", e) for e in meter_errors] + [("weather", e) for e in weather_errors]
    if errors:
        handler.save_csv("ingest_errors.csv", ([source, e.line, e.reason, ",".join(e.raw)] for source, e in errors),
                         ["source", "line", "reason", "raw"])
    if not readings:
        raise DataFormatError("no valid meter readings", path=meters_path)
    if not records:
        raise DataFormatError("no valid weather records", path=weather_path)

    settings = PreprocessConfig.from_config(config)
    demand = {}
    for dma_id, series in aggregate_dma(readings).items():
        demand[dma_id], outliers = preprocess_demand(series, settings)
        logger.info(f"{dma_id}: {int(outliers.sum())} outliers removed")
    weather = preprocess_weather(weather_series(records), settings)
    demand, weather = align(demand, weather)
    write_demand_csv(demand, _path(workdir, constants.DEFAULT_DEMAND_CLEAN_CSV))
    write_weather_csv(weather, _path(workdir, constants.DEFAULT_WEATHER_CLEAN_CSV))
    return constants.EXIT_OK


def _forecast_series(path: str) -> Dict[str, TimeSeries]:
    """Hourly forecast and actual series per (model, DMA) from a forecast CSV."""
    frame = load_csv_to_dataframe(path, constants.FORECAST_CSV_HEADER)
    frame["timestamp"] = pd.to_datetime(frame["timestamp"], utc=True, format="ISO8601")
    series = {}
    for (model, dma_id), group in frame.groupby(["model", "dma_id"], sort=True):
        group = group.drop_duplicates("timestamp").set_index("timestamp").sort_index()
        group = group.reindex(pd.date_range(group.index[0], group.index[-1], freq="h"))
        for column, label in (("forecast_kwh", f"forecast:{model}:{dma_id}"), ("actual_kwh", f"actual:{dma_id}")):
            if label not in series:
                series[label] = TimeSeries(group.index, group[column].to_numpy(dtype=np.float64), name=label)
    return series


def cmd_decompose(args, config: Config) -> int:
    """Write trend/seasonal/residual components of demand, temperature and optionally forecasts"""
    workdir = _workdir(args, config)
    period = args.period or config.get("DECOMPOSITION_PERIOD", 24, var_type=int)
    demand = read_demand_csv(_path(workdir, constants.DEFAULT_DEMAND_CLEAN_CSV))
    weather = read_weather_csv(_path(workdir, constants.DEFAULT_WEATHER_CLEAN_CSV))
    series = {f"demand:{dma_id}": s for dma_id, s in demand.items()}
    series["max_temp"] = weather.max_temp
    rows = []
    for name, s in series.items():
        rows.extend(decomposition_rows(name, s.timestamps, seasonal_decompose(s, period)))
    handler = CSVHandler(workdir)
    handler.save_csv("decomposition.csv", rows, constants.DECOMPOSITION_CSV_HEADER)

    if args.forecasts:
        rows = []
        for name, s in _forecast_series(args.forecasts).items():
            if np.isnan(s.values).any() or len(s) < 2 * period:
                logger.warning(f"Skipping '{name}': {len(s)} hours with gaps or shorter than two periods")
                continue
            rows.extend(decomposition_rows(name, s.timestamps, seasonal_decompose(s, period)))
        handler.save_csv("decomposition_forecasts.csv", rows, constants.DECOMPOSITION_CSV_HEADER)
    return constants.EXIT_OK


def cmd_train(args, config: Config) -> int:
    """Train one model kind and save its best-epoch checkpoint"""
    workdir = _workdir(args, config)
    data = load_prepared(config, workdir)
    train_batch, val_batch = make_batch(data.train, data.scaler), make_batch(data.val, data.scaler)
    base = training.TrainConfig.from_config(config)
    model_cfg = model_config(args.model, data.layout, str(config.get("MODEL_SCALE", "desk")),
                             {"positional": str(config.get("POSITIONAL_ENCODING", "learned"))})

    def run(train_config: training.TrainConfig, model_cfg=model_cfg) -> TrainOutcome:
        model = build_model(args.model, model_cfg, seed=train_config.seed, layout=data.layout, scaler=data.scaler)
        model, history = training.train(model, train_batch, val_batch, train_config)
        return TrainOutcome(model, history)

    if args.grid:
        space = training.grid_space_from_config(config)
        best, results = training.grid_search(
            space, lambda params, seed: run(training.apply_hyperparameters(base, params, seed),
                                            apply_model_hyperparameters(model_cfg, params)),
            base_seed=base.seed, max_workers=config.get("GRID_WORKERS", 1, var_type=int))
        winner = next(r for r in results if r.params == best)
        if winner.outcome is None:
            raise HeatcastError(f"every grid point failed; first error: {results[0].error}")
        outcome = winner.outcome
    else:
        outcome = run(base)

    save_checkpoint(outcome.model, _path(workdir, constants.CHECKPOINT_TEMPLATE.format(kind=args.model)))
    CSVHandler(workdir).save_csv(
        constants.HISTORY_TEMPLATE.format(kind=args.model),
        ([epoch, constants.FLOAT_FORMAT_EXACT % t, constants.FLOAT_FORMAT_EXACT % v]
         for epoch, t, v in outcome.history.rows()),
        constants.HISTORY_CSV_HEADER)
    logger.info(f"{args.model}: best epoch {outcome.history.best_epoch}, val_loss={outcome.val_loss:.9g}")
    return constants.EXIT_OK


def cmd_evaluate(args, config: Config) -> int:
    """Score trained models and the persistence baseline on the test year"""
    workdir = _workdir(args, config)
    data = load_prepared(config, workdir)
    baseline_report, baseline_records = evaluation.evaluate(evaluation.PersistenceBaseline(), data.test,
                                                            data.scaler)
    for kind in _kinds(args, workdir):
        model = load_checkpoint(_path(workdir, constants.CHECKPOINT_TEMPLATE.format(kind=kind)))
        report, records = evaluation.evaluate(model, data.test)
        evaluation.write_metrics([report, baseline_report], _path(workdir, constants.METRICS_TEMPLATE.format(kind=kind)))
        evaluation.export_forecast(records + baseline_records,
                                   _path(workdir, constants.FORECASTS_TEMPLATE.format(kind=kind)))
        print(f"{kind:<12} {report.aggregate}")
    print(f"{constants.PERSISTENCE_KIND:<12} {baseline_report.aggregate}")
    return constants.EXIT_OK


def cmd_forecast(args, config: Config) -> int:
    """Write the 24-hour forecast of every DMA for one origin"""
    workdir = _workdir(args, config)
    data = load_prepared(config, workdir)
    windows = data.train + data.val + data.test
    if args.origin:
        origin = pd.Timestamp(args.origin)
        origin = origin.tz_localize("UTC") if origin.tzinfo is None else origin.tz_convert("UTC")
    else:
        origin = max(w.origin for w in windows)
    chosen = [w for w in windows if w.origin == origin]
    if not chosen:
        raise DataFormatError(f"no sample window at origin {format_timestamp(origin)}")
    for kind in _kinds(args, workdir):
        model = load_checkpoint(_path(workdir, constants.CHECKPOINT_TEMPLATE.format(kind=kind)))
        _, records = evaluation.evaluate(model, chosen)
        path = args.output or _path(workdir, f"forecast_{kind}_{origin.strftime('%Y%m%d')}.csv")
        evaluation.export_forecast(records, path)
        for record in records:
            print(f"{kind} {record.dma_id} {format_timestamp(origin)}: "
                  + " ".join(constants.FLOAT_FORMAT_EXPORT % v for v in record.forecast))
    return constants.EXIT_OK


def cmd_plot_data(args, config: Config) -> int:
    """Emit one-week forecast/actual tables and the per-DMA metrics table"""
    workdir = _workdir(args, config)
    handler = CSVHandler(workdir)
    reports: Dict[str, evaluation.MetricsReport] = {}
    for kind in _kinds(args, workdir):
        frame = load_csv_to_dataframe(_path(workdir, constants.FORECASTS_TEMPLATE.format(kind=kind)),
                                      constants.FORECAST_CSV_HEADER)
        frame["dma_id"] = frame["dma_id"].astype(str)
        dma_id = args.dma or sorted(frame["dma_id"].unique())[0]
        stamps = pd.to_datetime(frame["timestamp"], utc=True, format="ISO8601")
        chosen = frame["dma_id"] == dma_id
        if args.start:
            chosen &= stamps >= pd.Timestamp(args.start, tz="UTC")
        if not chosen.any():
            raise DataFormatError(f"no forecasts for DMA '{dma_id}'", path=workdir)
        first = stamps[chosen].min()
        week = frame[chosen & (stamps < first + pd.Timedelta(hours=constants.HOURS_PER_WEEK))]
        handler.save_dataframe(f"plot_week_{kind}.csv", week[constants.FORECAST_CSV_HEADER],
                               constants.FLOAT_FORMAT_EXPORT)
        for report in evaluation.read_metrics(_path(workdir, constants.METRICS_TEMPLATE.format(kind=kind))):
            reports.setdefault(report.model, report)
    ordered = [reports[name] for name in sorted(reports)]
    handler.save_csv("dma_metrics.csv", evaluation.dma_metrics_rows(ordered), constants.DMA_METRICS_CSV_HEADER)
    return constants.EXIT_OK


HANDLERS = {
    "synth": cmd_synth, "preprocess": cmd_preprocess, "decompose": cmd_decompose, "train": cmd_train,
    "evaluate": cmd_evaluate, "forecast": cmd_forecast, "plot-data": cmd_plot_data,
}


def build_parser() -> CliParser:
    common = CliParser(add_help=False)
    common.add_argument("--seed", type=int, help="random seed (SEED)")
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("--workdir", help="directory for inputs and outputs (DATA_PATH)")
    common.add_argument("--log-file", help="also write log records to this file")

    parser = CliParser(prog="heatcast", description="Wavelet-scalogram heat demand forecasting")
    sub = parser.add_subparsers(dest="command", parser_class=CliParser)

    p = sub.add_parser("synth", parents=[common], help=cmd_synth.__doc__)
    p.add_argument("--days", type=int, help="days to generate (N_DAYS)")
    p.add_argument("--dmas", type=int, help="number of DMAs (DMA_COUNT)")
    p.add_argument("--noise", type=float, help="noise level (NOISE_LEVEL)")
    p.add_argument("--start", help="first day, e.g. 2016-01-01 (SYNTH_START)")

    p = sub.add_parser("preprocess", parents=[common], help=cmd_preprocess.__doc__)
    p.add_argument("--meters", help="meter CSV (default: <workdir>/meters.csv)")
    p.add_argument("--weather", help="weather CSV (default: <workdir>/weather.csv)")

    p = sub.add_parser("decompose", parents=[common], help=cmd_decompose.__doc__)
    p.add_argument("--period", type=int, help="seasonal period in hours (DECOMPOSITION_PERIOD)")
    p.add_argument("--forecasts", help="forecast CSV whose forecast and actual columns are decomposed too")

    p = sub.add_parser("train", parents=[common], help=cmd_train.__doc__)
    p.add_argument("--model", required=True, choices=constants.MODEL_KINDS)
    p.add_argument("--epochs", type=int, help="maximum epochs (MAX_EPOCHS)")
    p.add_argument("--grid", action="store_true", help="grid search over GRID_<NAME> settings")

    p = sub.add_parser("evaluate", parents=[common], help=cmd_evaluate.__doc__)
    p.add_argument("--model", choices=constants.MODEL_KINDS, help="default: every trained model")

    p = sub.add_parser("forecast", parents=[common], help=cmd_forecast.__doc__)
    p.add_argument("--model", choices=constants.MODEL_KINDS, help="default: every trained model")
    p.add_argument("--origin", help="forecast origin (midnight UTC); default: last available")
    p.add_argument("--output", help="output CSV path")

    p = sub.add_parser("plot-data", parents=[common], help=cmd_plot_data.__doc__)
    p.add_argument("--model", choices=constants.MODEL_KINDS, help="default: every trained model")
    p.add_argument("--dma", help="DMA for the weekly table (default: first)")
    p.add_argument("--start", help="first day of the weekly table (default: first test day)")
    return parser


def _overrides(args) -> Dict[str, object]:
    mapping = {"seed": "SEED", "days": "N_DAYS", "dmas": "DMA_COUNT", "noise": "NOISE_LEVEL",
               "start": "SYNTH_START", "epochs": "MAX_EPOCHS"}
    if args.command != "synth":
        mapping.pop("start")
    return {key: getattr(args, name) for name, key in mapping.items() if getattr(args, name, None) is not None}


def run_application(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, run one subcommand and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(list(sys.argv[1:] if argv is None else argv))
        if args.command is None:
            raise UsageError("no command given")
    except UsageError as e:
        print(f"{e}\n{parser.format_usage()}", file=sys.stderr, end="")
        return constants.EXIT_USAGE_ERROR
    except SystemExit as e:  # --help
        return int(e.code or 0)

    try:
        config = Config(config_file_path=os.path.join(project_root_main, "config.json"),
                        settings_path=args.config, overrides=_overrides(args))
        setup_logging(config=config, log_file=args.log_file)
        logger.info(f"Starting {constants.APP_NAME_DEFAULT} {constants.VERSION}: {args.command}")
        return HANDLERS[args.command](args, config)
    except UsageError as e:
        print(f"{e}\n{parser.format_usage()}", file=sys.stderr, end="")
        return e.exit_code
    except HeatcastError as e:
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        return constants.EXIT_DATA_ERROR


if __name__ == "__main__":
    sys.exit(run_application())
