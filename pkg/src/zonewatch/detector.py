"""Anomaly detector with the sklearn-style estimator API.

fit() consumes benign rows only: it splits them into a training and an
optimization set, z-scores with the training statistics, trains the
autoencoder, and fixes the detection threshold at mean + sample standard
deviation of the optimization-set reconstruction errors. predict() flags a
row as malicious iff its reconstruction error strictly exceeds that
threshold; a tie is normal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autoencoder as ae
from .base import BaseEstimator, check_is_fitted
from .datagen import split_rows
from .errors import InsufficientDataError, ValidationError
from .rng import Rng
from .validation import check_array

__all__ = ["DetectionThreshold", "compute_threshold", "AutoencoderAnomalyDetector"]


@dataclass(frozen=True)
class DetectionThreshold:
    th_v: float
    opt_mean: float
    opt_std: float


def compute_threshold(opt_mses) -> DetectionThreshold:
    """Threshold = mean + Bessel-corrected sample std of the MSE list."""
    values = np.asarray(list(opt_mses), dtype=np.float64)
    if values.size < 2:
        raise InsufficientDataError(
            f"threshold needs at least 2 MSE values, got {values.size}"
        )
    mean = float(values.mean())
    std = float(values.std(ddof=1))
    return DetectionThreshold(th_v=mean + std, opt_mean=mean, opt_std=std)


class AutoencoderAnomalyDetector(BaseEstimator):
    """Reconstruction-error detector around the from-scratch autoencoder.

    Parameters mirror the training contract: lr_n is the gradient step
    size, epochs the iteration budget, patience the early-stop window,
    split_ratio the benign train/optimization split.
    """

    def __init__(self, layer_sizes=None, activation="tanh", lr_n=0.01,
                 epochs=60, batch_size=32, patience=5, split_ratio=2.0 / 3.0,
                 seed=0):
        self.layer_sizes = layer_sizes
        self.activation = activation
        self.lr_n = lr_n
        self.epochs = epochs
        self.batch_size = batch_size
        self.patience = patience
        self.split_ratio = split_ratio
        self.seed = seed
        self.model_ = None
        self.threshold_ = None
        self.opt_mses_ = None
        self.history_ = None
        self.initial_opt_mse_ = None
        self.best_epoch_ = None

    def fit(self, X, y=None) -> "AutoencoderAnomalyDetector":
        """Fit on benign rows; y is accepted and ignored for pipeline
        compatibility."""
        X = check_array(X)
        root = Rng(self.seed)
        train_rows, opt_rows = split_rows(X, self.split_ratio, root.child("split"))
        if len(train_rows) < 1 or len(opt_rows) < 2:
            raise InsufficientDataError(
                f"split of {len(X)} rows leaves too few for training "
                f"({len(train_rows)}) or thresholding ({len(opt_rows)})"
            )

        sizes = self.layer_sizes or ae.default_layer_sizes(X.shape[1])
        arch = ae.Architecture(tuple(sizes), self.activation)
        if arch.input_dim != X.shape[1]:
            raise ValidationError(
                f"layer_sizes start at {arch.input_dim} but data has "
                f"{X.shape[1]} features"
            )
        model = ae.init_model(arch, root.child("init"))
        model.normalizer = ae.Normalizer.fit(train_rows)

        config = ae.TrainConfig(
            lr_n=self.lr_n, epochs=self.epochs, batch_size=self.batch_size,
            seed=root.child("train").seed, patience=self.patience,
        )
        result = ae.train(model,
                          model.normalizer.normalize(train_rows),
                          model.normalizer.normalize(opt_rows),
                          config)

        self.model_ = result.model
        self.opt_mses_ = ae.reconstruction_errors(
            result.model, result.model.normalizer.normalize(opt_rows))
        self.threshold_ = compute_threshold(self.opt_mses_)
        self.history_ = result.history
        self.initial_opt_mse_ = result.initial_opt_mse
        self.best_epoch_ = result.best_epoch
        return self

    def score_samples(self, X) -> np.ndarray:
        """Reconstruction MSE per row; higher means more anomalous."""
        check_is_fitted(self, "model_")
        X = check_array(X)
        return ae.reconstruction_errors(self.model_,
                                        self.model_.normalizer.normalize(X))

    def predict(self, X) -> np.ndarray:
        """1 for malicious (score strictly above threshold), else 0."""
        check_is_fitted(self, "threshold_")
        return (self.score_samples(X) > self.threshold_.th_v).astype(np.int64)

    def save(self, path) -> None:
        check_is_fitted(self, "threshold_")
        ae.save_model(path, self.model_, extra={
            "th_v": self.threshold_.th_v,
            "opt_mean": self.threshold_.opt_mean,
            "opt_std": self.threshold_.opt_std,
            "opt_mses": self.opt_mses_,
        })

    @classmethod
    def load(cls, path) -> "AutoencoderAnomalyDetector":
        model, extra = ae.load_model(path)
        for key in ("th_v", "opt_mean", "opt_std"):
            if key not in extra:
                raise ValidationError(f"model file missing threshold field {key!r}")
        det = cls(layer_sizes=model.architecture.layer_sizes,
                  activation=model.architecture.activation)
        det.model_ = model
        det.threshold_ = DetectionThreshold(
            float(extra["th_v"]), float(extra["opt_mean"]), float(extra["opt_std"]))
        if "opt_mses" in extra:
            det.opt_mses_ = extra["opt_mses"]
        return det
