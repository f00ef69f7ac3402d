"""Synthetic benign and Mirai-like traffic at desk scale, plus CSV I/O.

The 115 features mirror the public IoT-traffic dataset layout: 23 summary
statistics per time window across 5 windows, partitioned into named groups
(packet-rate, packet-size, inter-arrival, connection-count). Attack
profiles inflate specific groups multiplicatively, which is what a flood
or scan does to rate/count aggregates.

Benign rows are drawn from a small Gaussian mixture with a per-row
lognormal amplitude on the noise: quiet snapshots cluster tightly, bursty
ones stretch the tail. That heavy tail is what places the mean+std
detection threshold near the far benign percentiles.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InsufficientDataError, ValidationError
from .rng import Rng
from .validation import check_fraction

__all__ = [
    "FEATURE_COUNT", "FEATURE_GROUPS", "MixtureComponent", "BenignProfile",
    "AttackProfile", "LabeledDataset", "ATTACK_NAMES", "default_benign_profile",
    "default_attack_profile", "default_profile_config", "profile_from_config",
    "gen_benign", "gen_attack", "TrafficSampler", "load_csv", "save_csv",
    "split", "split_rows", "save_profile_config", "load_profile_config",
]

N_WINDOWS = 5
STATS_PER_WINDOW = 23
FEATURE_COUNT = N_WINDOWS * STATS_PER_WINDOW  # 115

# per-window partition of the 23 statistics
_GROUP_LAYOUT = (
    ("packet_rate", 6),
    ("packet_size", 8),
    ("inter_arrival", 4),
    ("conn_count", 5),
)


def _build_groups():
    groups = {name: [] for name, _ in _GROUP_LAYOUT}
    for w in range(N_WINDOWS):
        base = w * STATS_PER_WINDOW
        offset = 0
        for name, width in _GROUP_LAYOUT:
            groups[name].extend(range(base + offset, base + offset + width))
            offset += width
    return {name: np.array(idx) for name, idx in groups.items()}


FEATURE_GROUPS = _build_groups()


@dataclass(frozen=True)
class MixtureComponent:
    weight: float
    means: np.ndarray
    stds: np.ndarray


@dataclass(frozen=True)
class BenignProfile:
    components: tuple
    amplitude_sigma: float = 1.4   # lognormal sigma of the per-row noise scale
    drift_rate: float = 0.0        # additive mean shift per row index

    def __post_init__(self):
        total = sum(c.weight for c in self.components)
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"component weights sum to {total}, expected 1")
        for c in self.components:
            if c.means.shape != (FEATURE_COUNT,) or c.stds.shape != (FEATURE_COUNT,):
                raise ValidationError("component means/stds must have 115 entries")
            if np.any(c.stds <= 0):
                raise ValidationError("component stds must be positive")

    @property
    def mean(self) -> np.ndarray:
        """Mixture mean per feature (drift excluded)."""
        return sum(c.weight * c.means for c in self.components)


@dataclass(frozen=True)
class AttackProfile:
    name: str
    inflation: dict          # feature group -> multiplicative factor
    jitter: dict = field(default_factory=dict)  # group -> relative noise sigma

    def __post_init__(self):
        for group in list(self.inflation) + list(self.jitter):
            if group not in FEATURE_GROUPS:
                raise ValidationError(f"unknown feature group {group!r}")
        if not any(f > 1.0 for f in self.inflation.values()):
            raise ValidationError("an attack must inflate at least one group")

    @property
    def affected_groups(self) -> set:
        return set(self.inflation) | set(self.jitter)


ATTACK_NAMES = ("mirai-flood", "mirai-scan")


def default_attack_profile(name: str) -> AttackProfile:
    if name == "mirai-flood":
        return AttackProfile(name, inflation={"packet_rate": 20.0, "conn_count": 20.0})
    if name == "mirai-scan":
        return AttackProfile(name, inflation={"conn_count": 8.0},
                             jitter={"conn_count": 0.5})
    raise ValidationError(
        f"unknown attack {name!r}; valid attacks: {', '.join(ATTACK_NAMES)}"
    )


def default_benign_profile(profile_seed: int = 0) -> BenignProfile:
    """Three mixture components over positive traffic statistics."""
    rng = Rng(profile_seed).child("benign-profile")
    weights = (0.5, 0.3, 0.2)
    components = tuple(
        MixtureComponent(
            weight=w,
            means=10.0 + 3.0 * rng.normal(size=FEATURE_COUNT),
            stds=np.abs(rng.normal(0.5, 0.2, size=FEATURE_COUNT)) + 0.2,
        )
        for w in weights
    )
    return BenignProfile(components)


@dataclass
class LabeledDataset:
    X: np.ndarray                  # (n, 115) float64
    labels: np.ndarray             # (n,) int: 0 benign, 1 malicious
    device_ids: list

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[1] != FEATURE_COUNT:
            raise ValidationError(
                f"dataset must have {FEATURE_COUNT} columns, got {self.X.shape}"
            )
        if len(self.labels) != len(self.X) or len(self.device_ids) != len(self.X):
            raise ValidationError("row, label and device counts must match")

    def __len__(self):
        return len(self.X)

    @classmethod
    def concat(cls, *parts: "LabeledDataset") -> "LabeledDataset":
        return cls(
            np.vstack([p.X for p in parts]),
            np.concatenate([p.labels for p in parts]),
            [d for p in parts for d in p.device_ids],
        )


class TrafficSampler:
    """Incremental per-device draws for the simulation driver."""

    def __init__(self, profile: BenignProfile, rng: Rng,
                 attack: Optional[AttackProfile] = None):
        self.profile = profile
        self.attack = attack
        self._rng = rng
        self._weights = np.array([c.weight for c in profile.components])
        self._t = 0

    def set_attack(self, attack: Optional[AttackProfile]) -> None:
        self.attack = attack

    def draw(self) -> np.ndarray:
        p = self.profile
        comp = p.components[int(self._rng.choice(len(p.components), p=self._weights))]
        amp = np.exp(self._rng.normal(0.0, p.amplitude_sigma))
        row = comp.means + amp * comp.stds * self._rng.normal(size=FEATURE_COUNT)
        row = row + p.drift_rate * self._t
        self._t += 1
        if self.attack is not None:
            row = _apply_attack(row.reshape(1, -1), self.attack, self._rng)[0]
        return row


def _benign_rows(profile: BenignProfile, n: int, rng: Rng) -> np.ndarray:
    weights = np.array([c.weight for c in profile.components])
    comp = rng.choice(len(profile.components), size=n, p=weights)
    means = np.stack([c.means for c in profile.components])[comp]
    stds = np.stack([c.stds for c in profile.components])[comp]
    amp = np.exp(rng.normal(0.0, profile.amplitude_sigma, size=(n, 1)))
    X = means + amp * stds * rng.normal(size=(n, FEATURE_COUNT))
    if profile.drift_rate != 0.0:
        X = X + profile.drift_rate * np.arange(n)[:, None]
    return X


def _apply_attack(X: np.ndarray, attack: AttackProfile, rng: Rng) -> np.ndarray:
    X = X.copy()
    for group, factor in attack.inflation.items():
        X[:, FEATURE_GROUPS[group]] *= factor
    for group, sigma in attack.jitter.items():
        idx = FEATURE_GROUPS[group]
        X[:, idx] *= 1.0 + rng.normal(0.0, sigma, size=X[:, idx].shape)
    return X


def _device_ids(prefix: str, n: int, device_count: int = 4) -> list:
    return [f"{prefix}-{i % device_count:02d}" for i in range(n)]


def gen_benign(profile: BenignProfile, n: int, seed) -> LabeledDataset:
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    rng = Rng.coerce(seed)
    X = _benign_rows(profile, n, rng)
    return LabeledDataset(X, np.zeros(n, dtype=np.int64), _device_ids("dev", n))


def gen_attack(attack: AttackProfile, base: BenignProfile, n: int, seed) -> LabeledDataset:
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    rng = Rng.coerce(seed)
    X = _apply_attack(_benign_rows(base, n, rng), attack, rng)
    return LabeledDataset(X, np.ones(n, dtype=np.int64), _device_ids("bot", n))


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------

_LABEL_VALUES = {"benign": 0, "malicious": 1, "0": 0, "1": 1}
_LABEL_NAMES = {0: "benign", 1: "malicious"}


def save_csv(path, dataset: LabeledDataset) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["device_id"] + [f"f{i + 1:03d}" for i in range(FEATURE_COUNT)]
                   + ["label"])
        for dev, row, label in zip(dataset.device_ids, dataset.X, dataset.labels):
            w.writerow([dev] + [repr(float(v)) for v in row]
                       + [_LABEL_NAMES[int(label)]])


def load_csv(path) -> LabeledDataset:
    """Parse a feature CSV: 115 numeric columns plus optional device_id and
    label columns, identified by header name."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file, expected a header row")
        header = [h.strip() for h in header]
        dev_col = header.index("device_id") if "device_id" in header else None
        label_col = header.index("label") if "label" in header else None
        feature_cols = [i for i in range(len(header))
                        if i != dev_col and i != label_col]
        if len(feature_cols) != FEATURE_COUNT:
            raise ValidationError(
                f"{path}: expected {FEATURE_COUNT} feature columns, "
                f"found {len(feature_cols)}"
            )
        rows, labels, devices = [], [], []
        for rownum, cells in enumerate(reader, start=1):
            if not cells:
                continue
            if len(cells) != len(header):
                raise ValidationError(
                    f"{path}: row {rownum} has {len(cells)} cells, "
                    f"expected {len(header)}"
                )
            values = np.empty(FEATURE_COUNT)
            for j, col in enumerate(feature_cols):
                try:
                    values[j] = float(cells[col])
                except ValueError:
                    raise ValidationError(
                        f"{path}: row {rownum}, column {header[col]!r}: "
                        f"not a number: {cells[col]!r}"
                    )
            rows.append(values)
            if label_col is not None:
                raw = cells[label_col].strip().lower()
                if raw not in _LABEL_VALUES:
                    raise ValidationError(
                        f"{path}: row {rownum}: unknown label {raw!r}"
                    )
                labels.append(_LABEL_VALUES[raw])
            else:
                labels.append(0)
            devices.append(cells[dev_col] if dev_col is not None else "dev-00")
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return LabeledDataset(np.vstack(rows), np.asarray(labels, dtype=np.int64), devices)


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------

def split_rows(X: np.ndarray, ratio: float, seed):
    """Seeded shuffle then split; first part gets floor(n * ratio) rows."""
    check_fraction(ratio, "ratio")
    n = len(X)
    if n == 0:
        raise InsufficientDataError("cannot split an empty dataset")
    perm = Rng.coerce(seed).permutation(n)
    cut = int(np.floor(n * ratio))
    return X[perm[:cut]], X[perm[cut:]]


def split(dataset: LabeledDataset, ratio: float, seed):
    check_fraction(ratio, "ratio")
    n = len(dataset)
    if n == 0:
        raise InsufficientDataError("cannot split an empty dataset")
    perm = Rng.coerce(seed).permutation(n)
    cut = int(np.floor(n * ratio))

    def take(idx):
        return LabeledDataset(dataset.X[idx], dataset.labels[idx],
                              [dataset.device_ids[i] for i in idx])

    return take(perm[:cut]), take(perm[cut:])


# ---------------------------------------------------------------------------
# Profile config file (human-editable, all numeric parameters explicit)
# ---------------------------------------------------------------------------

def default_profile_config() -> dict:
    benign = default_benign_profile()
    return {
        "benign": {
            "amplitude_sigma": benign.amplitude_sigma,
            "drift_rate": benign.drift_rate,
            "components": [
                {"weight": c.weight,
                 "means": c.means.tolist(),
                 "stds": c.stds.tolist()}
                for c in benign.components
            ],
        },
        "attacks": {
            name: {
                "inflation": dict(default_attack_profile(name).inflation),
                "jitter": dict(default_attack_profile(name).jitter),
            }
            for name in ATTACK_NAMES
        },
    }


def profile_from_config(config: dict):
    """(BenignProfile, {attack name: AttackProfile}) from a config dict."""
    try:
        b = config["benign"]
        components = tuple(
            MixtureComponent(
                weight=float(c["weight"]),
                means=np.asarray(c["means"], dtype=np.float64),
                stds=np.asarray(c["stds"], dtype=np.float64),
            )
            for c in b["components"]
        )
        benign = BenignProfile(components,
                               amplitude_sigma=float(b["amplitude_sigma"]),
                               drift_rate=float(b["drift_rate"]))
        attacks = {
            name: AttackProfile(name,
                                inflation={k: float(v) for k, v in spec["inflation"].items()},
                                jitter={k: float(v) for k, v in spec.get("jitter", {}).items()})
            for name, spec in config.get("attacks", {}).items()
        }
    except (KeyError, TypeError) as e:
        raise ValidationError(f"malformed profile config: {e}") from e
    return benign, attacks


def save_profile_config(path, config: dict) -> None:
    with open(path, "w") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_profile_config(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
