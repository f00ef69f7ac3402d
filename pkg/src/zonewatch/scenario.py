"""Scenario scripts and the simulation driver.

Line-oriented grammar, one op per line ('#' starts a comment):

    TICK <n>                          advance the shared clock (monotone)
    REGISTER <zone> <device>          create zone on first use, enrol device
    SEND <zone> <from> <to> <hex>     route a message with fresh features
    INJECT <zone> <device> <attack>   switch the device's traffic to an attack

Features for each SEND are drawn from the sending device's traffic sampler:
benign by default, the named attack profile after INJECT. Zone monitors are
either preloaded from a trained model or fitted online from each zone's
first `train_after` snapshots, i.e. the clean window collected right after
the devices join.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import hashlib

from . import autoencoder as ae
from . import datagen
from .crypto import keygen
from .detector import AutoencoderAnomalyDetector
from .errors import ScenarioError
from .ledger import DEFAULT_BLOCKSIZE
from .monitor import DEFAULT_TAU, DEFAULT_TRUST_WINDOW, SnapshotMeta
from .rng import Rng
from .zone import Zone, make_association_request

__all__ = ["ScenarioOp", "parse_scenario", "SimConfig", "SimDriver", "SimResult"]

_OPS = ("TICK", "REGISTER", "SEND", "INJECT")


def _octet(name: str) -> int:
    """Deterministic pseudo-address byte for simulated IP/MAC fields."""
    return hashlib.sha256(name.encode("utf-8")).digest()[0]


@dataclass(frozen=True)
class ScenarioOp:
    kind: str
    args: tuple
    lineno: int


def parse_scenario(text: str) -> list:
    ops = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0].upper()
        args = parts[1:]
        if kind == "TICK":
            if len(args) != 1:
                raise ScenarioError(lineno, "TICK takes one integer argument")
            try:
                tick = int(args[0])
            except ValueError:
                raise ScenarioError(lineno, f"bad tick value {args[0]!r}")
            if tick < 0:
                raise ScenarioError(lineno, "tick must be non-negative")
            ops.append(ScenarioOp("TICK", (tick,), lineno))
        elif kind == "REGISTER":
            if len(args) != 2:
                raise ScenarioError(lineno, "REGISTER takes <zone> <device>")
            ops.append(ScenarioOp("REGISTER", tuple(args), lineno))
        elif kind == "SEND":
            if len(args) != 4:
                raise ScenarioError(lineno, "SEND takes <zone> <from> <to> <payload-hex>")
            try:
                bytes.fromhex(args[3])
            except ValueError:
                raise ScenarioError(lineno, f"bad payload hex {args[3]!r}")
            ops.append(ScenarioOp("SEND", tuple(args), lineno))
        elif kind == "INJECT":
            if len(args) != 3:
                raise ScenarioError(lineno, "INJECT takes <zone> <device> <attack>")
            if args[2] not in datagen.ATTACK_NAMES:
                raise ScenarioError(
                    lineno, f"unknown attack {args[2]!r}; "
                    f"valid attacks: {', '.join(datagen.ATTACK_NAMES)}"
                )
            ops.append(ScenarioOp("INJECT", tuple(args), lineno))
        else:
            raise ScenarioError(lineno, f"unknown op {parts[0]!r}; "
                                f"expected one of {', '.join(_OPS)}")
    return ops


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    blocksize: int = DEFAULT_BLOCKSIZE
    window: int = DEFAULT_TRUST_WINDOW
    tau: float = DEFAULT_TAU
    train_after: int = 300          # clean-window size for online fitting
    train: ae.TrainConfig = field(default_factory=ae.TrainConfig)
    split_ratio: float = 2.0 / 3.0


@dataclass
class _DeviceSim:
    keys: object
    sampler: datagen.TrafficSampler


@dataclass
class _ZoneSim:
    zone: Zone
    devices: dict


@dataclass
class SimResult:
    zones: dict                      # label -> Zone
    verdicts: dict                   # label -> [Verdict]
    alerts: list                     # (label, Alert)
    statuses: dict                   # label -> ZoneStatus (post-flush)
    orphans: dict                    # label -> [seq_id]


class SimDriver:
    """Executes scenario ops against real zones over the simulated transport."""

    def __init__(self, config: SimConfig,
                 profile: Optional[datagen.BenignProfile] = None,
                 attacks: Optional[dict] = None,
                 detector: Optional[AutoencoderAnomalyDetector] = None):
        self.config = config
        self.profile = profile or datagen.default_benign_profile()
        self.attacks = attacks or {
            name: datagen.default_attack_profile(name)
            for name in datagen.ATTACK_NAMES
        }
        self.detector = detector  # preloaded, shared by every zone
        self.rng = Rng(config.seed)
        self.zones: dict = {}
        self.verdicts: dict = {}
        self.alerts: list = []
        self.tick = 0

    # -- helpers -------------------------------------------------------------

    def _zone(self, label: str, lineno: int) -> _ZoneSim:
        zs = self.zones.get(label)
        if zs is None:
            raise ScenarioError(lineno, f"unknown zone {label!r}; REGISTER first")
        return zs

    def _ensure_zone(self, label: str) -> _ZoneSim:
        zs = self.zones.get(label)
        if zs is not None:
            return zs
        master_keys = keygen(self.rng.child(f"key:{label}:master"))
        zone = Zone(label, master_keys, blocksize=self.config.blocksize,
                    window=self.config.window, tau=self.config.tau)
        zone.set_tick(self.tick)
        master_sim = _DeviceSim(
            keys=master_keys,
            sampler=datagen.TrafficSampler(
                self.profile, self.rng.child(f"traffic:{label}:{zone.master_id}")),
        )
        zs = _ZoneSim(zone=zone, devices={zone.master_id: master_sim})
        if self.detector is not None:
            zone.monitor.attach_detector(self.detector)
        self.zones[label] = zs
        self.verdicts[label] = []
        return zs

    # -- ops ----------------------------------------------------------------

    def run(self, ops) -> SimResult:
        for op in ops:
            handler = getattr(self, f"_op_{op.kind.lower()}")
            handler(op)
        return self.finish()

    def _op_tick(self, op: ScenarioOp) -> None:
        (tick,) = op.args
        if tick < self.tick:
            raise ScenarioError(op.lineno,
                                f"tick must not go backwards ({self.tick} -> {tick})")
        self.tick = tick
        for zs in self.zones.values():
            zs.zone.set_tick(tick)

    def _op_register(self, op: ScenarioOp) -> None:
        label, device = op.args
        zs = self._ensure_zone(label)
        if device in zs.zone.devices:
            raise ScenarioError(op.lineno,
                                f"device {device!r} already registered in {label!r}")
        keys = keygen(self.rng.child(f"key:{label}:{device}"))
        ticket = zs.zone.issue_ticket(device, keys.public_key)
        nonce = self.rng.child(f"nonce:{label}:{device}").u64()
        request = make_association_request(ticket, nonce, keys.secret_key)
        result = zs.zone.associate(request)
        if not result.accepted:  # cannot happen with well-formed driver state
            raise ScenarioError(op.lineno, f"association rejected: {result.reason}")
        zs.devices[device] = _DeviceSim(
            keys=keys,
            sampler=datagen.TrafficSampler(
                self.profile, self.rng.child(f"traffic:{label}:{device}")),
        )

    def _op_inject(self, op: ScenarioOp) -> None:
        label, device, attack = op.args
        zs = self._zone(label, op.lineno)
        dev = zs.devices.get(device)
        if dev is None:
            raise ScenarioError(op.lineno, f"unknown device {device!r} in {label!r}")
        dev.sampler.set_attack(self.attacks[attack])

    def _op_send(self, op: ScenarioOp) -> None:
        label, frm, to, payload_hex = op.args
        zs = self._zone(label, op.lineno)
        dev = zs.devices.get(frm)
        if dev is None:
            raise ScenarioError(op.lineno, f"unknown device {frm!r} in {label!r}")
        if to not in zs.zone.devices:
            raise ScenarioError(op.lineno, f"unknown device {to!r} in {label!r}")
        features = dev.sampler.draw()
        meta = SnapshotMeta(src_ip=f"10.0.0.{_octet(frm) % 250 + 1}",
                            dst_ip=f"10.0.0.{_octet(to) % 250 + 1}",
                            mac=f"02:{_octet(frm):02x}",
                            port="49152")
        result = zs.zone.route_message(frm, to, bytes.fromhex(payload_hex),
                                       features, dev.keys.secret_key, meta)
        if not result.delivered:
            raise ScenarioError(op.lineno,
                                f"message rejected: {result.reason}")
        if result.verdict is not None:
            self.verdicts[label].append(result.verdict)
        if result.alert is not None:
            self.alerts.append((label, result.alert))
        self._maybe_fit(label, zs)

    def _maybe_fit(self, label: str, zs: _ZoneSim) -> None:
        """Online fitting once the clean collection window is full."""
        monitor = zs.zone.monitor
        if monitor.trained or self.detector is not None:
            return
        if len(monitor.by_seq) < self.config.train_after:
            return
        snapshots = [monitor.by_seq[k] for k in sorted(monitor.by_seq)]
        snapshots = snapshots[: self.config.train_after]
        cfg = self.config.train
        fit_cfg = ae.TrainConfig(
            lr_n=cfg.lr_n, epochs=cfg.epochs, batch_size=cfg.batch_size,
            seed=self.rng.child(f"fit:{label}").seed, patience=cfg.patience,
        )
        monitor.fit(snapshots, config=fit_cfg, split_ratio=self.config.split_ratio)

    # -- wrap-up ---------------------------------------------------------------

    def finish(self) -> SimResult:
        statuses, orphans = {}, {}
        for label, zs in self.zones.items():
            zs.zone.ledger.flush()
            statuses[label] = zs.zone.zone_status()
            orphans[label] = zs.zone.monitor.audit(zs.zone.ledger)
        return SimResult(
            zones={label: zs.zone for label, zs in self.zones.items()},
            verdicts=self.verdicts, alerts=self.alerts,
            statuses=statuses, orphans=orphans,
        )
