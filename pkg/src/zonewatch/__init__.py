"""zonewatch: zoned IoT simulation with ledgered messaging and behavior
monitoring.

Detection estimators (fit/predict/score_samples with get_params) live next
to the protocol machinery: per-zone hash-chained ledgers, signed-ticket
device registration, Kalman-gated sensor fusion, and synthetic Mirai-style
traffic generation.
"""

from .autoencoder import (
    Architecture,
    AutoencoderModel,
    Normalizer,
    TrainConfig,
    default_layer_sizes,
    load_model,
    save_model,
    train,
)
from .baselines import IsolationForestDetector, LocalOutlierFactorDetector
from .crypto import Digest, KeyPair, keygen, sha256, sign, verify
from .datagen import (
    ATTACK_NAMES,
    FEATURE_COUNT,
    AttackProfile,
    BenignProfile,
    LabeledDataset,
    default_attack_profile,
    default_benign_profile,
    gen_attack,
    gen_benign,
    load_csv,
    save_csv,
    split,
)
from .detector import (
    AutoencoderAnomalyDetector,
    DetectionThreshold,
    compute_threshold,
)
from .evaluation import EvalReport, benign_quantile_threshold, run_detector
from .fusion import KalmanState, SensorSpec, fuse_step, gate, initial_state, predict
from .ledger import Block, Ledger, Transaction, export_ledger, import_ledger
from .monitor import BehaviorMonitor, Snapshot, SnapshotMeta, Verdict, ZoneTrust
from .rng import Rng
from .zone import AssociationRequest, Ticket, Zone, init_zone, make_association_request

__version__ = "0.1.0"
