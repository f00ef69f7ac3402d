import json

import numpy as np
import pytest

from zonewatch.errors import DegenerateEvalError, ValidationError
from zonewatch.evaluation import (
    EvalReport,
    benign_quantile_threshold,
    comparison_csv_rows,
    comparison_table,
    evaluate_scores,
    normalize_artifact,
    read_report,
    run_detector,
    write_report,
)
from zonewatch.rng import Rng


def test_perfect_detector():
    labels = np.array([0] * 50 + [1] * 50)
    scores = labels.astype(float)
    report = evaluate_scores("perfect", scores, labels, threshold=0.5)
    assert report.tpr == 1.0 and report.fpr == 0.0
    assert (report.tp, report.fn, report.fp, report.tn) == (50, 0, 0, 50)


def test_random_scores_tpr_close_to_fpr():
    rng = Rng(21)
    labels = np.array([0, 1] * 2000)
    scores = rng.random(4000)
    report = evaluate_scores("coin", scores, labels, threshold=0.5)
    assert abs(report.tpr - report.fpr) < 0.05


def test_counts_sum_to_dataset_size():
    rng = Rng(22)
    labels = (rng.random(500) > 0.7).astype(int)
    scores = rng.random(500)
    report = evaluate_scores("x", scores, labels, threshold=0.4)
    assert report.total == 500


def test_single_class_degenerate():
    with pytest.raises(DegenerateEvalError):
        evaluate_scores("x", np.ones(10), np.ones(10, dtype=int), 0.5)
    with pytest.raises(DegenerateEvalError):
        evaluate_scores("x", np.ones(10), np.zeros(10, dtype=int), 0.5)


def test_threshold_is_strict_inequality():
    labels = np.array([0, 1])
    scores = np.array([1.0, 1.0])
    report = evaluate_scores("tie", scores, labels, threshold=1.0)
    assert report.tpr == 0.0 and report.fpr == 0.0  # ties are normal


def test_benign_quantile_threshold():
    scores = np.arange(1, 101, dtype=float)
    th = benign_quantile_threshold(scores, q=0.99)
    assert th == pytest.approx(np.quantile(scores, 0.99))
    with pytest.raises(ValidationError):
        benign_quantile_threshold([], 0.99)
    with pytest.raises(ValidationError):
        benign_quantile_threshold(scores, 1.5)


class _ThresholdStub:
    """Scores equal the first feature."""

    def score_samples(self, X):
        return np.asarray(X, dtype=float)[:, 0]


def test_run_detector_measures_latency():
    X = np.concatenate([np.zeros(30), np.ones(30)]).reshape(-1, 1)
    labels = np.array([0] * 30 + [1] * 30)
    report = run_detector("stub", _ThresholdStub(), X, labels, threshold=0.5)
    assert report.tpr == 1.0 and report.fpr == 0.0
    assert report.latency_micros["mean"] > 0.0
    assert set(report.latency_micros) == {"mean", "p50", "p95", "p99"}


def test_report_json_roundtrip(tmp_path):
    report = EvalReport("ae", 0.99, 0.02, 1.5, 99, 2, 98, 1,
                        {"mean": 42.0, "p50": 40.0, "p95": 60.0, "p99": 80.0})
    path = tmp_path / "report.json"
    write_report(path, report)
    assert read_report(path) == report


def test_comparison_table_lists_all_detectors():
    reports = [
        EvalReport("autoencoder", 1.0, 0.03, 1.5, 10, 1, 30, 0, {"mean": 50.0, "p99": 70.0}),
        EvalReport("iforest", 0.9, 0.01, 0.6, 9, 0, 31, 1, {"mean": 400.0, "p99": 900.0}),
    ]
    table = comparison_table(reports)
    assert "autoencoder" in table and "iforest" in table
    rows = comparison_csv_rows(reports)
    assert len(rows) == 3 and rows[0][0] == "detector"


def test_normalize_artifact_strips_latency(tmp_path):
    csv_path = tmp_path / "verdicts.csv"
    csv_path.write_text(
        "seq_id,label,elapsed_micros\n1,normal,123.4\n2,malicious,99.1\n")
    normalized = normalize_artifact(csv_path)
    assert b"elapsed_micros" not in normalized
    assert b"123.4" not in normalized

    json_path = tmp_path / "report.json"
    write_report(json_path, EvalReport("ae", 1.0, 0.0, 1.0, 1, 0, 1, 0,
                                       {"mean": 5.0}))
    normalized = normalize_artifact(json_path)
    assert json.loads(normalized)["latency_micros"] == {}

    other = tmp_path / "plain.txt"
    other.write_bytes(b"unchanged")
    assert normalize_artifact(other) == b"unchanged"
