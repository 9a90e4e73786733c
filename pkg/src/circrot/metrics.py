"""Evaluation metrics over circular errors.

All metrics are computed from the per-sample circular distances between
predicted and true angles (degrees). Percentiles, including the median, use
linear interpolation between order statistics.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass

import numpy as np

from .circmath import circular_distance

THRESHOLDS = (2, 5, 10)
SCHEMA = "circrot.metrics/1"


@dataclass(frozen=True)
class MetricsReport:
    mae: float
    rmse: float
    median: float
    acc_at: dict[int, float]
    auc_at: dict[int, float]
    p90: float
    p95: float
    n: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["acc_at"] = {str(k): v for k, v in self.acc_at.items()}
        d["auc_at"] = {str(k): v for k, v in self.auc_at.items()}
        return d

    def to_json(self) -> str:
        return json.dumps({"schema": SCHEMA, **self.to_dict()}, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        d = json.loads(text)
        d.pop("schema", None)
        d["acc_at"] = {int(k): v for k, v in d["acc_at"].items()}
        d["auc_at"] = {int(k): v for k, v in d["auc_at"].items()}
        return cls(**d)

    def flat(self) -> dict[str, float]:
        """Flat ``column -> value`` view used for CSV rows and tables."""
        row = {"mae": self.mae, "rmse": self.rmse, "median": self.median}
        row.update({f"acc_at_{k}": v for k, v in self.acc_at.items()})
        row.update({f"auc_at_{k}": v for k, v in self.auc_at.items()})
        row.update({"p90": self.p90, "p95": self.p95, "n": self.n})
        return row

    def to_csv(self) -> str:
        row = self.flat()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(row.keys())
        w.writerow([repr(v) if isinstance(v, float) else v for v in row.values()])
        return buf.getvalue()


def _paired(predictions, truths) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(predictions, dtype=np.float64).ravel()
    t = np.asarray(truths, dtype=np.float64).ravel()
    if p.shape != t.shape:
        raise ValueError(f"{p.size} predictions but {t.size} truths")
    return p, t


def per_sample_errors(predictions, truths) -> np.ndarray:
    """Circular distance of each prediction to its truth, in input order."""
    p, t = _paired(predictions, truths)
    return np.atleast_1d(circular_distance(p, t))


def acc_at(errors, k: float) -> float:
    return float(np.mean(np.asarray(errors) <= k))


def auc_at(errors, k: float) -> float:
    """Normalised area under the cumulative accuracy curve on ``[0, k]``.

    ``Acc(t)`` is a step function of ``t``: each error ``e <= k`` contributes
    ``1/n`` on ``[e, k]``. Summing the areas of those steps over the sorted
    errors gives the exact integral.
    """
    e = np.sort(np.asarray(errors, dtype=np.float64))
    if k <= 0:
        raise ValueError("k must be positive")
    inside = e[e <= k]
    return float(np.sum(k - inside) / (e.size * k))


def summarize_errors(errors) -> MetricsReport:
    e = np.asarray(errors, dtype=np.float64)
    if e.size == 0:
        raise ValueError("cannot evaluate an empty set of predictions")
    p50, p90, p95 = np.percentile(e, [50, 90, 95])
    return MetricsReport(
        mae=float(e.mean()),
        rmse=float(np.sqrt(np.mean(e**2))),
        median=float(p50),
        acc_at={k: acc_at(e, k) for k in THRESHOLDS},
        auc_at={k: auc_at(e, k) for k in THRESHOLDS},
        p90=float(p90),
        p95=float(p95),
        n=int(e.size),
    )


def evaluate(predictions, truths) -> MetricsReport:
    """Full metric suite for paired predicted and true angles (degrees)."""
    return summarize_errors(per_sample_errors(predictions, truths))


def errors_csv(predictions, truths) -> str:
    """Per-sample CSV: ``index,prediction_deg,truth_deg,error_deg``."""
    p, t = _paired(predictions, truths)
    e = per_sample_errors(p, t)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "prediction_deg", "truth_deg", "error_deg"])
    for i, row in enumerate(zip(p, t, e)):
        w.writerow([i, *(repr(float(v)) for v in row)])
    return buf.getvalue()
