# app/services/evaluation.py
"""Forecast metrics in kWh, per-DMA reports and forecast export."""
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from app.core.exceptions import ContractError, DataFormatError
from app.services.features import Batch, FeatureScaler, SampleWindow, make_batch
from app.services.ingest import format_timestamp
from app.utils import constants
from app.utils.csv_handler import CSVHandler

logger = logging.getLogger(__name__)

MAPE_EPSILON = 1e-6


def _pair(pred, actual, name: str) -> Tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    actual = np.asarray(actual, dtype=np.float64).reshape(-1)
    if pred.size != actual.size:
        raise ContractError(f"{name}: prediction has {pred.size} values, actual has {actual.size}")
    if pred.size == 0:
        raise ContractError(f"{name}: empty input")
    return pred, actual


def mae(pred, actual) -> float:
    """Mean absolute error, kWh."""
    pred, actual = _pair(pred, actual, "mae")
    return float(np.mean(np.abs(pred - actual)))


def mape(pred, actual) -> float:
    """Mean absolute percentage error with denominators floored at 1e-6."""
    pred, actual = _pair(pred, actual, "mape")
    return float(np.mean(np.abs(pred - actual) / np.maximum(np.abs(actual), MAPE_EPSILON)) * 100.0)


def _mean_std(values: Sequence[float]) -> Tuple[float, float]:
    ordered = sorted(values)
    n = len(ordered)
    mean = math.fsum(ordered) / n
    variance = math.fsum((v - mean) ** 2 for v in ordered) / n
    return mean, math.sqrt(variance)


@dataclass(frozen=True)
class MetricSummary:
    """Mean ± population standard deviation of per-window MAE and MAPE."""
    mae_mean: float
    mae_std: float
    mape_mean: float
    mape_std: float
    windows: int

    @classmethod
    def from_values(cls, maes: Sequence[float], mapes: Sequence[float]) -> "MetricSummary":
        if not maes:
            raise ContractError("MetricSummary: no windows")
        mae_mean, mae_std = _mean_std(maes)
        mape_mean, mape_std = _mean_std(mapes)
        return cls(mae_mean, mae_std, mape_mean, mape_std, len(maes))

    def __str__(self) -> str:
        return (f"MAE {self.mae_mean:.4f} ± {self.mae_std:.4f} kWh, "
                f"MAPE {self.mape_mean:.2f}% ± {self.mape_std:.2f}% ({self.windows} windows)")


@dataclass(frozen=True, eq=False)
class ForecastRecord:
    origin: pd.Timestamp
    dma_id: str
    model: str
    forecast: np.ndarray
    actual: np.ndarray

    def rows(self) -> Iterable[List[str]]:
        fmt = constants.FLOAT_FORMAT_EXPORT
        for hour, (f, a) in enumerate(zip(self.forecast, self.actual)):
            yield [format_timestamp(self.origin + pd.Timedelta(hours=hour)), self.dma_id, self.model,
                   fmt % f, fmt % a]


@dataclass
class MetricsReport:
    model: str
    per_dma: Dict[str, MetricSummary]
    aggregate: MetricSummary
    window_mae: List[float] = field(default_factory=list, repr=False)
    window_mape: List[float] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "aggregate": vars(self.aggregate),
            "per_dma": {dma_id: vars(summary) for dma_id, summary in sorted(self.per_dma.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        return cls(data["model"], {k: MetricSummary(**v) for k, v in data["per_dma"].items()},
                   MetricSummary(**data["aggregate"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def summarize(model_name: str, records: Sequence[ForecastRecord]) -> MetricsReport:
    if not records:
        raise ContractError("summarize: no forecast records")
    maes = [mae(r.forecast, r.actual) for r in records]
    mapes = [mape(r.forecast, r.actual) for r in records]
    per_dma: Dict[str, MetricSummary] = {}
    for dma_id in sorted(set(r.dma_id for r in records)):
        picked = [i for i, r in enumerate(records) if r.dma_id == dma_id]
        per_dma[dma_id] = MetricSummary.from_values([maes[i] for i in picked], [mapes[i] for i in picked])
    return MetricsReport(model_name, per_dma, MetricSummary.from_values(maes, mapes), maes, mapes)


class PersistenceBaseline:
    """Tomorrow equals today: copies demand over [t−24h, t)."""
    kind = constants.PERSISTENCE_KIND
    layout = None
    scaler = None

    def forecast_kwh(self, batch: Batch) -> np.ndarray:
        return batch.last_day.copy()


def forecast_kwh(model, batch: Batch, scaler: Optional[FeatureScaler] = None) -> np.ndarray:
    """(B, 24) forecasts de-scaled and de-differenced to kWh."""
    if hasattr(model, "forecast_kwh"):
        return model.forecast_kwh(batch)
    scaler = scaler or model.scaler
    return scaler.unscale_target(model.predict(batch), batch.last_day)


def evaluate(model, windows: Sequence[SampleWindow],
             scaler: Optional[FeatureScaler] = None) -> Tuple[MetricsReport, List[ForecastRecord]]:
    """
    Forecasts every window and scores it against the actual demand in kWh.

    Raises:
        ContractError: the model was trained on a different channel layout, or
            no scaler is available.
    """
    if not windows:
        raise ContractError("evaluate: no windows")
    layout = windows[0].layout
    if getattr(model, "layout", None) is not None and model.layout != layout:
        raise ContractError(f"evaluate: model channels {model.layout.endogenous + model.layout.exogenous} "
                            f"differ from window channels {layout.endogenous + layout.exogenous}")
    if scaler is None:
        scaler = getattr(model, "scaler", None)
    if scaler is None:
        if not hasattr(model, "forecast_kwh"):
            raise ContractError(f"evaluate: {model.kind} has no scaler to de-scale forecasts")
        # the baseline reads kWh directly; the scaler only shapes the batch
        scaler = FeatureScaler.fit(windows)
    batch = make_batch(windows, scaler)
    forecasts = forecast_kwh(model, batch, scaler)
    records = [ForecastRecord(w.origin, w.dma_id, model.kind, forecasts[i], w.target.copy())
               for i, w in enumerate(windows)]
    report = summarize(model.kind, records)
    logger.info(f"{model.kind}: {report.aggregate}")
    return report, records


def export_forecast(records: Sequence[ForecastRecord], path: str, handler: Optional[CSVHandler] = None) -> str:
    """``timestamp,dma_id,model,forecast_kwh,actual_kwh``, one row per hour per model, 9 significant digits."""
    rows = (row for record in records for row in record.rows())
    return (handler or CSVHandler()).save_csv(path, rows, constants.FORECAST_CSV_HEADER)


def write_metrics(reports: Sequence[MetricsReport], path: str) -> str:
    payload = {report.model: report.to_dict() for report in reports}
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise DataFormatError(f"could not write metrics: {e}", path=path) from e
    logger.info(f"Wrote metrics for {', '.join(r.model for r in reports)} to {path}")
    return path


def read_metrics(path: str) -> List[MetricsReport]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
        return [MetricsReport.from_dict(data) for _, data in sorted(payload.items())]
    except OSError as e:
        raise DataFormatError(f"could not read metrics: {e}", path=path) from e
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise DataFormatError(f"malformed metrics file: {e}", path=path) from e


def dma_metrics_rows(reports: Sequence[MetricsReport]) -> List[List[str]]:
    """Rows of the per-DMA metrics table, aggregate rows labelled 'all'."""
    rows = []
    for report in reports:
        for dma_id, s in list(sorted(report.per_dma.items())) + [("all", report.aggregate)]:
            rows.append([dma_id, report.model, "%.9g" % s.mae_mean, "%.9g" % s.mae_std,
                         "%.9g" % s.mape_mean, "%.9g" % s.mape_std, str(s.windows)])
    return rows

