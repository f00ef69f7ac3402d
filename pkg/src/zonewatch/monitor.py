"""Per-zone behavior monitor.

Stores every traffic snapshot off-chain keyed by a monotone sequence ID,
returns the payload hash for on-chain recording, classifies snapshots with
the fitted autoencoder against the mean+std threshold, and maintains the
zone's rolling trust level. The audit operation cross-checks the store
against the ledger: each stored snapshot's payload hash must appear sealed
exactly once with the matching sequence ID.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autoencoder as ae
from .crypto import Digest, sha256
from .datagen import FEATURE_COUNT
from .detector import AutoencoderAnomalyDetector, DetectionThreshold, compute_threshold
from .encoding import Reader, encode_bytes, encode_f64s, encode_str, encode_u64, record
from .errors import InsufficientDataError, NotFittedError, NotFoundError, ValidationError

__all__ = [
    "LABEL_NORMAL", "LABEL_MALICIOUS", "SnapshotMeta", "Snapshot", "Verdict",
    "Alert", "ZoneTrust", "SequenceCounter", "BehaviorMonitor", "classify",
    "MIN_FIT_SNAPSHOTS", "DEFAULT_TRUST_WINDOW", "DEFAULT_TAU",
]

LABEL_NORMAL = "normal"
LABEL_MALICIOUS = "malicious"

MIN_FIT_SNAPSHOTS = 50
DEFAULT_TRUST_WINDOW = 1000
DEFAULT_TAU = 0.95

STATUS_TRUSTED = "trusted"
STATUS_UNTRUSTED = "untrusted"
STATUS_NO_DATA = "no-data"


@dataclass(frozen=True)
class SnapshotMeta:
    src_ip: str = ""
    dst_ip: str = ""
    mac: str = ""
    port: str = ""


@dataclass
class Snapshot:
    """One featurized traffic observation from a device."""

    device_id: str
    features: np.ndarray
    meta: SnapshotMeta = field(default_factory=SnapshotMeta)
    tick: int = 0
    content: bytes = b""
    seq_id: Optional[int] = None  # assigned when stored

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.shape != (FEATURE_COUNT,):
            raise ValidationError(
                f"snapshot needs {FEATURE_COUNT} features, got {self.features.shape}"
            )

    def payload_bytes(self) -> bytes:
        """Canonical wire form. Excludes seq_id: the device hashes and signs
        this before the master assigns the ID."""
        return record(
            encode_str(self.device_id),
            encode_u64(self.tick),
            encode_str(self.meta.src_ip),
            encode_str(self.meta.dst_ip),
            encode_str(self.meta.mac),
            encode_str(self.meta.port),
            encode_f64s(self.features),
            encode_bytes(self.content),
        )

    def payload_hash(self) -> Digest:
        return sha256(self.payload_bytes())

    @classmethod
    def from_payload_bytes(cls, data: bytes) -> "Snapshot":
        r = Reader(data)
        device_id = r.str()
        tick = r.u64()
        meta = SnapshotMeta(r.str(), r.str(), r.str(), r.str())
        features = r.f64s()
        content = r.bytes()
        r.expect_end()
        return cls(device_id, features, meta, tick, content)


@dataclass(frozen=True)
class Verdict:
    seq_id: int
    device_id: str
    mse: float
    threshold: float
    label: str
    tick: int
    elapsed_micros: float = field(compare=False, default=0.0)


@dataclass(frozen=True)
class Alert:
    seq_id: int
    device_id: str
    tick: int
    mse: float
    threshold: float


@dataclass(frozen=True)
class ZoneTrust:
    trust: float
    status: str
    malicious_count: int
    observed: int
    window: int
    tau: float


class SequenceCounter:
    """Monotone per-zone sequence IDs, starting at 1."""

    def __init__(self):
        self._next = 1

    @property
    def peek(self) -> int:
        return self._next

    def take(self) -> int:
        value = self._next
        self._next += 1
        return value


def classify(model: ae.AutoencoderModel, threshold: DetectionThreshold,
             snapshot: Snapshot) -> Verdict:
    """Label one snapshot: malicious iff reconstruction MSE strictly exceeds
    the threshold (a tie is normal). Wall time is recorded on the verdict."""
    if model.normalizer is None:
        raise NotFittedError("model has no normalizer; not trained")
    t0 = time.perf_counter_ns()
    z = model.normalizer.normalize(snapshot.features)
    err = float(ae.reconstruction_errors(model, z)[0])
    elapsed = (time.perf_counter_ns() - t0) / 1000.0
    label = LABEL_MALICIOUS if err > threshold.th_v else LABEL_NORMAL
    return Verdict(
        seq_id=snapshot.seq_id if snapshot.seq_id is not None else 0,
        device_id=snapshot.device_id, mse=err, threshold=threshold.th_v,
        label=label, tick=snapshot.tick, elapsed_micros=elapsed,
    )


class BehaviorMonitor:
    """Snapshot store + detector + rolling trust for one zone."""

    def __init__(self, window: int = DEFAULT_TRUST_WINDOW, tau: float = DEFAULT_TAU,
                 counter: Optional[SequenceCounter] = None):
        if window < 1:
            raise ValidationError(f"window must be >= 1, got {window}")
        if not 0.0 < tau <= 1.0:
            raise ValidationError(f"tau must be in (0, 1], got {tau}")
        self.window = window
        self.tau = tau
        self.counter = counter or SequenceCounter()
        self.by_seq: dict = {}
        self.by_hash: dict = {}          # payload hash hex -> seq_id
        self.detector: Optional[AutoencoderAnomalyDetector] = None
        self.verdicts: deque = deque(maxlen=window)
        self.observed = 0
        self.anomaly_hints: dict = {}    # device_id -> sensor-gating rejections

    # -- storage ------------------------------------------------------------

    @property
    def trained(self) -> bool:
        return self.detector is not None and self.detector.threshold_ is not None

    @property
    def model(self) -> ae.AutoencoderModel:
        self._require_trained()
        return self.detector.model_

    @property
    def threshold(self) -> DetectionThreshold:
        self._require_trained()
        return self.detector.threshold_

    def _require_trained(self):
        if not self.trained:
            raise NotFittedError("not-trained: fit the monitor first")

    def has_payload_hash(self, digest: Digest) -> bool:
        return digest.hex in self.by_hash

    def record_snapshot(self, snapshot: Snapshot):
        """Persist under the next sequence ID; returns (seq_id, payload hash)
        for ledger submission."""
        if not np.all(np.isfinite(snapshot.features)):
            raise ValidationError("invalid-feature: snapshot features must be finite")
        digest = snapshot.payload_hash()
        if digest.hex in self.by_hash:
            raise ValidationError(
                f"replay: payload hash {digest.hex[:12]} already recorded"
            )
        snapshot.seq_id = self.counter.take()
        self.by_seq[snapshot.seq_id] = snapshot
        self.by_hash[digest.hex] = snapshot.seq_id
        return snapshot.seq_id, digest

    def get_by_seq(self, seq_id: int) -> Snapshot:
        try:
            return self.by_seq[seq_id]
        except KeyError:
            raise NotFoundError(f"no snapshot with seq_id {seq_id}") from None

    def get_by_hash(self, digest: Digest) -> Snapshot:
        seq = self.by_hash.get(digest.hex)
        if seq is None:
            raise NotFoundError(f"no snapshot with payload hash {digest.hex}")
        return self.by_seq[seq]

    # -- training -----------------------------------------------------------

    def fit(self, snapshots, config: Optional[ae.TrainConfig] = None,
            split_ratio: float = 2.0 / 3.0, layer_sizes=None,
            activation: str = "tanh"):
        """Train on benign snapshots from the clean collection window.

        Returns (model, threshold)."""
        snapshots = list(snapshots)
        if len(snapshots) < MIN_FIT_SNAPSHOTS:
            raise InsufficientDataError(
                f"need at least {MIN_FIT_SNAPSHOTS} snapshots to fit, "
                f"got {len(snapshots)}"
            )
        X = np.stack([s.features for s in snapshots])
        return self.fit_rows(X, config=config, split_ratio=split_ratio,
                             layer_sizes=layer_sizes, activation=activation)

    def fit_rows(self, X, config: Optional[ae.TrainConfig] = None,
                 split_ratio: float = 2.0 / 3.0, layer_sizes=None,
                 activation: str = "tanh"):
        config = config or ae.TrainConfig()
        det = AutoencoderAnomalyDetector(
            layer_sizes=layer_sizes, activation=activation, lr_n=config.lr_n,
            epochs=config.epochs, batch_size=config.batch_size,
            patience=config.patience, split_ratio=split_ratio, seed=config.seed,
        )
        det.fit(X)
        self.detector = det
        return det.model_, det.threshold_

    def attach_detector(self, detector: AutoencoderAnomalyDetector) -> None:
        """Adopt an already-fitted detector (e.g. loaded from a model file)."""
        if detector.threshold_ is None:
            raise NotFittedError("detector is not fitted")
        self.detector = detector

    # -- classification and trust -------------------------------------------

    def classify(self, snapshot: Snapshot) -> Verdict:
        self._require_trained()
        return classify(self.model, self.threshold, snapshot)

    def observe(self, snapshot: Snapshot):
        """Record + classify + update the trust window.

        Returns (verdict, alert); alert is None for normal verdicts."""
        self._require_trained()
        self.record_snapshot(snapshot)
        return self.observe_recorded(snapshot)

    def observe_recorded(self, snapshot: Snapshot):
        """Classify a snapshot that is already in the store."""
        verdict = self.classify(snapshot)
        self.verdicts.append(verdict)
        self.observed += 1
        alert = None
        if verdict.label == LABEL_MALICIOUS:
            alert = Alert(verdict.seq_id, verdict.device_id, verdict.tick,
                          verdict.mse, verdict.threshold)
        return verdict, alert

    def monitor_stream(self, snapshots):
        """Generator over (verdict, alert) pairs for a snapshot stream."""
        self._require_trained()
        for snapshot in snapshots:
            yield self.observe(snapshot)

    def note_sensor_rejection(self, device_id: str) -> None:
        """Gating rejections count as anomaly hints, never direct verdicts."""
        self.anomaly_hints[device_id] = self.anomaly_hints.get(device_id, 0) + 1

    def trust_level(self) -> ZoneTrust:
        n = len(self.verdicts)
        if n == 0:
            return ZoneTrust(1.0, STATUS_NO_DATA, 0, self.observed,
                             self.window, self.tau)
        malicious = sum(1 for v in self.verdicts if v.label == LABEL_MALICIOUS)
        trust = 1.0 - malicious / n
        status = STATUS_TRUSTED if trust >= self.tau else STATUS_UNTRUSTED
        return ZoneTrust(trust, status, malicious, self.observed,
                         self.window, self.tau)

    # -- audit and persistence ------------------------------------------------

    def audit(self, ledger) -> list:
        """Sequence IDs of snapshots whose payload hash is not sealed exactly
        once with a matching seq (flush the ledger first)."""
        counts: dict = {}
        for block in ledger.chain:
            for tx in block.transactions:
                counts[tx.payload_hash.hex] = counts.get(tx.payload_hash.hex, 0) + 1
        orphans = []
        for seq_id, snapshot in self.by_seq.items():
            h = snapshot.payload_hash()
            if counts.get(h.hex, 0) != 1:
                orphans.append(seq_id)
                continue
            tx, _, _ = ledger.lookup(h)
            if tx.seq_id != seq_id:
                orphans.append(seq_id)
        return sorted(orphans)

    def save_state(self, path) -> None:
        self._require_trained()
        self.detector.save(path)

    def load_state(self, path) -> None:
        self.attach_detector(AutoencoderAnomalyDetector.load(path))
