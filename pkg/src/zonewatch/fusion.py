"""Kalman fusion of redundant altitude sensors with innovation gating.

A two-state constant-velocity filter (position, velocity in meters and
meters/tick) fuses any number of scalar sensors. Each reading is gated by a
chi-square test on its normalized innovation before it may touch the state,
so a drifting or hostile sensor is excluded automatically while the healthy
ones keep correcting the estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .errors import FusionNumericError, ValidationError

__all__ = [
    "KalmanState", "SensorSpec", "GateResult", "FusionVerdict",
    "initial_state", "predict", "gate", "update", "fuse_step",
]

DEFAULT_GATE_P = 0.01


@dataclass
class KalmanState:
    x: np.ndarray                 # (position, velocity)
    P: np.ndarray                 # 2x2 covariance
    Q: np.ndarray                 # 2x2 process noise per tick
    tick: int = 0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64).reshape(2)
        self.P = np.asarray(self.P, dtype=np.float64).reshape(2, 2)
        self.Q = np.asarray(self.Q, dtype=np.float64).reshape(2, 2)

    @property
    def position(self) -> float:
        return float(self.x[0])

    @property
    def velocity(self) -> float:
        return float(self.x[1])


def initial_state(position: float = 0.0, velocity: float = 0.0,
                  position_var: float = 1e4, velocity_var: float = 1e2,
                  q_position: float = 1e-3, q_velocity: float = 1e-3) -> KalmanState:
    """Weakly-informed prior: large P so the first readings dominate."""
    return KalmanState(
        x=np.array([position, velocity]),
        P=np.diag([position_var, velocity_var]),
        Q=np.diag([q_position, q_velocity]),
    )


@dataclass(frozen=True)
class SensorSpec:
    sensor_id: str
    H: tuple = (1.0, 0.0)         # observation row mapping state to measurement
    R: float = 1.0                # measurement noise variance
    gate_p: float = DEFAULT_GATE_P

    def __post_init__(self):
        if self.R <= 0:
            raise ValidationError(f"{self.sensor_id}: R must be > 0, got {self.R}")
        if not 0.0 < self.gate_p < 1.0:
            raise ValidationError(
                f"{self.sensor_id}: gate_p must be in (0, 1), got {self.gate_p}"
            )

    @property
    def h_row(self) -> np.ndarray:
        return np.asarray(self.H, dtype=np.float64).reshape(2)


@dataclass(frozen=True)
class GateResult:
    accepted: bool
    normalized_innovation: float  # nu^2 / S


@dataclass(frozen=True)
class FusionVerdict:
    fused_x: np.ndarray
    accepted: list                # sensor ids applied, in input order
    rejected: list                # (sensor id, normalized innovation)
    coasting: bool = False        # true when every reading was gated out


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return (P + P.T) / 2.0


def predict(state: KalmanState, dt: int) -> KalmanState:
    """Constant-velocity propagation: x <- F x, P <- F P F^T + Q dt."""
    if dt < 0:
        raise ValidationError(f"dt must be >= 0, got {dt}")
    F = np.array([[1.0, float(dt)], [0.0, 1.0]])
    x = F @ state.x
    P = _symmetrize(F @ state.P @ F.T + state.Q * dt)
    return KalmanState(x, P, state.Q, state.tick + dt)


def gate(state: KalmanState, reading: float, spec: SensorSpec) -> GateResult:
    """Chi-square(1) test on the innovation against the predicted state."""
    h = spec.h_row
    nu = float(reading) - float(h @ state.x)
    S = float(h @ state.P @ h + spec.R)
    if S <= 0:
        raise FusionNumericError(f"{spec.sensor_id}: non-positive innovation "
                                 f"covariance S={S}")
    d2 = nu * nu / S
    limit = float(chi2.ppf(1.0 - spec.gate_p, 1))
    return GateResult(accepted=d2 <= limit, normalized_innovation=d2)


def update(state: KalmanState, reading: float, spec: SensorSpec) -> KalmanState:
    """Standard scalar Kalman update (Joseph form keeps P positive)."""
    h = spec.h_row
    S = float(h @ state.P @ h + spec.R)
    if S <= 0:
        raise FusionNumericError(f"{spec.sensor_id}: non-positive innovation "
                                 f"covariance S={S}")
    K = (state.P @ h) / S
    nu = float(reading) - float(h @ state.x)
    x = state.x + K * nu
    IKH = np.eye(2) - np.outer(K, h)
    P = IKH @ state.P @ IKH.T + np.outer(K, K) * spec.R
    return KalmanState(x, _symmetrize(P), state.Q, state.tick)


def fuse_step(state: KalmanState, readings, dt: int):
    """Predict, gate every reading against the prediction, then apply the
    accepted ones sequentially.

    readings: iterable of (SensorSpec, value). Returns (state, verdict);
    when all readings are rejected the state coasts on the prediction.
    """
    readings = list(readings)
    if not readings:
        raise ValidationError("fuse_step needs at least one reading")
    state = predict(state, dt)
    accepted, rejected = [], []
    passed = []
    for spec, value in readings:
        result = gate(state, value, spec)
        if result.accepted:
            accepted.append(spec.sensor_id)
            passed.append((spec, value))
        else:
            rejected.append((spec.sensor_id, result.normalized_innovation))
    for spec, value in passed:
        state = update(state, value, spec)
    verdict = FusionVerdict(fused_x=state.x.copy(), accepted=accepted,
                            rejected=rejected, coasting=not accepted)
    return state, verdict
