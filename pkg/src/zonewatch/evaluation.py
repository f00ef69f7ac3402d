"""Detection quality and latency measurement.

Produces one EvalReport per detector: TPR/FPR against labels, confusion
counts, and per-instance scoring latency percentiles. Latency is the only
nondeterministic output and is excluded from golden comparisons; the
normalize_artifact helper strips it so artifacts can be diffed byte-wise.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEvalError, ValidationError
from .validation import check_array

__all__ = [
    "EvalReport", "benign_quantile_threshold", "evaluate_scores",
    "run_detector", "write_report", "read_report", "comparison_table",
    "normalize_artifact",
]

LATENCY_KEYS = ("mean", "p50", "p95", "p99")


@dataclass(frozen=True)
class EvalReport:
    detector: str
    tpr: float
    fpr: float
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int
    latency_micros: dict

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict:
        return {
            "detector": self.detector,
            "tpr": self.tpr,
            "fpr": self.fpr,
            "threshold": self.threshold,
            "counts": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
            "latency_micros": dict(self.latency_micros),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        c = d["counts"]
        return cls(d["detector"], d["tpr"], d["fpr"], d["threshold"],
                   c["tp"], c["fp"], c["tn"], c["fn"],
                   dict(d.get("latency_micros", {})))


def benign_quantile_threshold(benign_scores, q: float = 0.99) -> float:
    """Score quantile on a benign calibration split."""
    scores = np.asarray(benign_scores, dtype=np.float64)
    if scores.size == 0:
        raise ValidationError("no benign calibration scores")
    if not 0.0 < q < 1.0:
        raise ValidationError(f"quantile must be in (0, 1), got {q}")
    return float(np.quantile(scores, q))


def evaluate_scores(detector_name: str, scores, labels, threshold: float,
                    latencies_micros=None) -> EvalReport:
    """Confusion counts from scores vs labels; malicious iff score > threshold."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape:
        raise ValidationError("scores and labels must align")
    pos = labels == 1
    if not pos.any() or pos.all():
        raise DegenerateEvalError(
            "evaluation needs both benign and malicious rows"
        )
    flagged = scores > threshold
    tp = int(np.sum(flagged & pos))
    fn = int(np.sum(~flagged & pos))
    fp = int(np.sum(flagged & ~pos))
    tn = int(np.sum(~flagged & ~pos))
    lat = {}
    if latencies_micros is not None:
        arr = np.asarray(latencies_micros, dtype=np.float64)
        lat = {
            "mean": float(arr.mean()),
            "p50": float(np.percentile(arr, 50)),
            "p95": float(np.percentile(arr, 95)),
            "p99": float(np.percentile(arr, 99)),
        }
    return EvalReport(detector_name, tpr=tp / (tp + fn), fpr=fp / (fp + tn),
                      threshold=float(threshold), tp=tp, fp=fp, tn=tn, fn=fn,
                      latency_micros=lat)


def run_detector(name: str, detector, X, labels, threshold: float) -> EvalReport:
    """Score one row at a time so per-instance latency is honest."""
    X = check_array(X)
    scores = np.empty(len(X))
    lat = np.empty(len(X))
    for i in range(len(X)):
        t0 = time.perf_counter_ns()
        scores[i] = detector.score_samples(X[i:i + 1])[0]
        lat[i] = (time.perf_counter_ns() - t0) / 1000.0
    return evaluate_scores(name, scores, labels, threshold, lat)


def write_report(path, report: EvalReport) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_report(path) -> EvalReport:
    with open(path) as fh:
        return EvalReport.from_dict(json.load(fh))


def comparison_table(reports) -> str:
    """Aligned text table: one row per detector, TPR/FPR/latency."""
    header = f"{'detector':<14} {'tpr':>8} {'fpr':>8} {'threshold':>12} {'mean_us':>10} {'p99_us':>10}"
    lines = [header, "-" * len(header)]
    for r in reports:
        mean = r.latency_micros.get("mean", float("nan"))
        p99 = r.latency_micros.get("p99", float("nan"))
        lines.append(
            f"{r.detector:<14} {r.tpr:>8.4f} {r.fpr:>8.4f} "
            f"{r.threshold:>12.6g} {mean:>10.1f} {p99:>10.1f}"
        )
    return "\n".join(lines)


def comparison_csv_rows(reports):
    rows = [["detector", "tpr", "fpr", "threshold", "tp", "fp", "tn", "fn",
             "latency_mean_us", "latency_p50_us", "latency_p95_us", "latency_p99_us"]]
    for r in reports:
        rows.append([
            r.detector, repr(r.tpr), repr(r.fpr), repr(r.threshold),
            r.tp, r.fp, r.tn, r.fn,
        ] + [repr(r.latency_micros.get(k, 0.0)) for k in LATENCY_KEYS])
    return rows


def normalize_artifact(path) -> bytes:
    """File content with latency fields zeroed, for deterministic hashing.

    CSV files lose columns whose header contains 'elapsed_micros' or starts
    with 'latency'; JSON files lose 'latency_micros' values. Other files
    pass through unchanged.
    """
    raw = open(path, "rb").read()
    name = str(path)
    if name.endswith(".json"):
        try:
            doc = json.loads(raw)
        except ValueError:
            return raw
        _strip_latency(doc)
        return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode()
    if name.endswith(".csv"):
        text = raw.decode()
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            return raw
        head = rows[0]
        drop = [i for i, h in enumerate(head)
                if "elapsed_micros" in h or h.startswith("latency")]
        if not drop:
            return raw
        keep = [i for i in range(len(head)) if i not in drop]
        out = io.StringIO()
        w = csv.writer(out)
        for row in rows:
            w.writerow([row[i] for i in keep if i < len(row)])
        return out.getvalue().encode()
    return raw


def _strip_latency(doc):
    if isinstance(doc, dict):
        for key in list(doc):
            if key == "latency_micros":
                doc[key] = {}
            else:
                _strip_latency(doc[key])
    elif isinstance(doc, list):
        for item in doc:
            _strip_latency(item)
