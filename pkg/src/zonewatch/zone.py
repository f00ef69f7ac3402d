"""Master/follower zone lifecycle over a simulated transport.

One master per zone acts as certification authority: it derives the group
ID, issues signed tickets, verifies association requests, and seals the
zone ledger. Every message between devices is first recorded as a ledger
transaction; only after acceptance does the payload reach the recipient's
inbox and the behavior monitor. The transport is an in-memory queue with an
injectable fault model (drop, corrupt, delay) standing in for the real
radio link while preserving exactly what is signed and verified.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import crypto
from .crypto import Digest, KeyPair, sha256
from .encoding import Reader, encode_bytes, encode_str, encode_u64, record
from .errors import DecodeError, ValidationError, ZoneError
from .ledger import DEFAULT_BLOCKSIZE, Ledger, Transaction, make_transaction
from .monitor import (
    DEFAULT_TAU,
    DEFAULT_TRUST_WINDOW,
    BehaviorMonitor,
    SequenceCounter,
    Snapshot,
    SnapshotMeta,
    ZoneTrust,
)

__all__ = [
    "Ticket", "AssociationRequest", "Message", "FaultModel", "Zone",
    "AssocResult", "RouteResult", "ZoneStatus", "init_zone",
    "make_association_request",
]


@dataclass(frozen=True)
class Ticket:
    group_id: Digest
    follower_id: str
    follower_pubkey: bytes
    issued_at: int
    master_signature: bytes

    def signing_bytes(self) -> bytes:
        return record(
            encode_bytes(self.group_id.bytes),
            encode_str(self.follower_id),
            encode_bytes(self.follower_pubkey),
            encode_u64(self.issued_at),
        )

    def to_bytes(self) -> bytes:
        return self.signing_bytes() + encode_bytes(self.master_signature)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Ticket":
        r = Reader(data)
        t = cls(Digest(r.bytes()), r.str(), r.bytes(), r.u64(), r.bytes())
        r.expect_end()
        return t

    def verify(self, master_pubkey: bytes) -> bool:
        return crypto.verify(master_pubkey, self.signing_bytes(),
                             self.master_signature)


@dataclass(frozen=True)
class AssociationRequest:
    ticket: Ticket
    nonce: int
    follower_signature: bytes

    def signing_bytes(self) -> bytes:
        return record(encode_bytes(self.ticket.to_bytes()), encode_u64(self.nonce))

    def to_bytes(self) -> bytes:
        return self.signing_bytes() + encode_bytes(self.follower_signature)

    def verify(self) -> bool:
        """Follower signature, checked against the pubkey named in the ticket."""
        try:
            return crypto.verify(self.ticket.follower_pubkey,
                                 self.signing_bytes(), self.follower_signature)
        except DecodeError:
            return False


def make_association_request(ticket: Ticket, nonce: int,
                             follower_secret: bytes) -> AssociationRequest:
    """Built on the follower device, which holds its own secret key."""
    unsigned = AssociationRequest(ticket, nonce, b"")
    sig = crypto.sign(follower_secret, unsigned.signing_bytes())
    return AssociationRequest(ticket, nonce, sig)


@dataclass(frozen=True)
class Message:
    sender: str
    recipient: str
    payload: bytes
    tx: Transaction


@dataclass(frozen=True)
class AssocResult:
    accepted: bool
    reason: Optional[str] = None
    tx: Optional[Transaction] = None


@dataclass(frozen=True)
class RouteResult:
    status: str                       # delivered | rejected | dropped | delayed
    reason: Optional[str] = None
    tx: Optional[Transaction] = None
    verdict: Optional[object] = None  # set once the monitor is trained
    alert: Optional[object] = None

    @property
    def delivered(self) -> bool:
        return self.status == "delivered"


@dataclass
class FaultModel:
    """Scripted transport faults. Flags apply to the next send and reset."""

    drop_next: bool = False
    corrupt_next: bool = False
    delay_next_ticks: int = 0

    def take(self):
        faults = (self.drop_next, self.corrupt_next, self.delay_next_ticks)
        self.drop_next = False
        self.corrupt_next = False
        self.delay_next_ticks = 0
        return faults

    @staticmethod
    def corrupt(wire: bytes) -> bytes:
        """Flip one bit in the middle of the payload."""
        if not wire:
            return wire
        pos = len(wire) // 2
        mutated = bytearray(wire)
        mutated[pos] ^= 0x01
        return bytes(mutated)


@dataclass
class _DeviceRecord:
    device_id: str
    public_key: bytes
    ticket: Optional[Ticket] = None
    active: bool = False


@dataclass(frozen=True)
class ZoneStatus:
    label: str
    group_id: str
    trust: ZoneTrust
    ledger_height: int
    pool_size: int
    active_devices: int
    pending_devices: int


class Zone:
    """Single-actor zone state: one master, followers, ledger, monitor."""

    def __init__(self, label: str, master_keys: KeyPair, *,
                 blocksize: int = DEFAULT_BLOCKSIZE,
                 window: int = DEFAULT_TRUST_WINDOW, tau: float = DEFAULT_TAU,
                 master_id: Optional[str] = None):
        self.label = label
        self.master_keys = master_keys
        self.master_id = master_id or f"{label}-master"
        self.group_id = sha256(master_keys.public_key + label.encode("utf-8"))
        self.ledger = Ledger(blocksize=blocksize)
        self.seq = SequenceCounter()
        self.monitor = BehaviorMonitor(window=window, tau=tau, counter=self.seq)
        self.tick = 0
        self.devices: dict = {
            self.master_id: _DeviceRecord(self.master_id,
                                          master_keys.public_key, active=True)
        }
        self.used_nonces: set = set()
        self.inboxes: dict = {self.master_id: []}
        self.fault_model = FaultModel()
        self._delayed: list = []
        self.ledger.register_device(self.master_id, master_keys.public_key)

    # -- clock ---------------------------------------------------------------

    def set_tick(self, tick: int) -> list:
        """Advance the zone clock; delivers any due delayed messages and
        returns their RouteResults."""
        if tick < self.tick:
            raise ZoneError(f"tick must not go backwards ({self.tick} -> {tick})")
        self.tick = tick
        due = [item for item in self._delayed if item[0] <= tick]
        self._delayed = [item for item in self._delayed if item[0] > tick]
        return [self._deliver(frm, to, wire, tx) for _, frm, to, wire, tx in due]

    # -- registration ---------------------------------------------------------

    def issue_ticket(self, follower_id: str, follower_pubkey: bytes) -> Ticket:
        if follower_id in self.devices:
            raise ZoneError(f"already-registered: {follower_id}")
        unsigned = Ticket(self.group_id, follower_id, follower_pubkey,
                          self.tick, b"")
        sig = crypto.sign(self.master_keys.secret_key, unsigned.signing_bytes())
        ticket = Ticket(self.group_id, follower_id, follower_pubkey,
                        self.tick, sig)
        self.devices[follower_id] = _DeviceRecord(follower_id, follower_pubkey,
                                                  ticket=ticket)
        return ticket

    def associate(self, request: AssociationRequest) -> AssocResult:
        """Verify both signatures, the group binding and the nonce; on accept
        the canonical request bytes go to the ledger and the follower
        becomes active."""
        if not request.verify():
            return AssocResult(False, "integrity")
        if not request.ticket.verify(self.master_keys.public_key):
            return AssocResult(False, "ticket")
        if request.ticket.group_id != self.group_id:
            return AssocResult(False, "foreign-ticket")
        if request.nonce in self.used_nonces:
            return AssocResult(False, "replay")
        fid = request.ticket.follower_id
        rec = self.devices.get(fid)
        if rec is None or rec.ticket is None:
            return AssocResult(False, "ticket")
        if rec.active:
            return AssocResult(False, "already-active")
        if rec.public_key != request.ticket.follower_pubkey:
            return AssocResult(False, "ticket")

        payload = request.to_bytes()
        tx = make_transaction(self.seq.take(), self.master_id, sha256(payload),
                              self.tick, self.master_keys.secret_key)
        result = self.ledger.submit(tx, self.master_keys.public_key)
        if not result.accepted:
            return AssocResult(False, f"ledger:{result.reason}")
        self.used_nonces.add(request.nonce)
        rec.active = True
        self.inboxes[fid] = []
        self.ledger.register_device(fid, rec.public_key)
        return AssocResult(True, tx=tx)

    # -- messaging -------------------------------------------------------------

    def route_message(self, msg_from: str, msg_to: str, payload: bytes,
                      features, sender_secret: bytes,
                      meta: Optional[SnapshotMeta] = None) -> RouteResult:
        """Send payload from one active device to another.

        The caller is the sending device, so it supplies its own secret key
        and the featurized observation of this traffic (snapshots arrive
        pre-featurized). The wire form is the canonical snapshot encoding;
        its hash is the transaction's payload hash.
        """
        sender = self.devices.get(msg_from)
        recipient = self.devices.get(msg_to)
        if sender is None or not sender.active:
            return RouteResult("rejected", "unknown-device")
        if recipient is None or not recipient.active:
            return RouteResult("rejected", "unknown-device")

        snapshot = Snapshot(msg_from, features, meta or SnapshotMeta(),
                            self.tick, payload)
        wire = snapshot.payload_bytes()
        tx = make_transaction(self.seq.peek, msg_from, sha256(wire),
                              self.tick, sender_secret)

        drop, corrupt, delay = self.fault_model.take()
        if drop:
            return RouteResult("dropped", "transport-drop")
        if corrupt:
            wire = FaultModel.corrupt(wire)
        if delay > 0:
            self._delayed.append((self.tick + delay, msg_from, msg_to, wire, tx))
            return RouteResult("delayed", "transport-delay", tx=tx)
        return self._deliver(msg_from, msg_to, wire, tx)

    def _deliver(self, msg_from: str, msg_to: str, wire: bytes,
                 tx: Transaction) -> RouteResult:
        """Master-side validation: recompute the payload hash from what
        actually arrived and check the sender's signature over it."""
        sender = self.devices.get(msg_from)
        if sender is None or not sender.active:
            return RouteResult("rejected", "unknown-device")
        try:
            snapshot = Snapshot.from_payload_bytes(wire)
        except (DecodeError, ValidationError):
            return RouteResult("rejected", "integrity")
        payload_hash = sha256(wire)
        checked = Transaction(tx.seq_id, tx.device_id, payload_hash,
                              tx.timestamp, tx.signature)
        if tx.device_id != msg_from or not checked.verify(sender.public_key):
            return RouteResult("rejected", "invalid-signature")
        if checked.seq_id != self.seq.peek or checked.seq_id <= self.ledger.last_seq:
            return RouteResult("rejected", "replay")
        if self.monitor.has_payload_hash(payload_hash):
            return RouteResult("rejected", "replay")
        if not np.all(np.isfinite(snapshot.features)):
            return RouteResult("rejected", "invalid-feature")

        seq_id, digest = self.monitor.record_snapshot(snapshot)
        assert seq_id == checked.seq_id and digest == payload_hash
        result = self.ledger.submit(checked, sender.public_key)
        if not result.accepted:  # unreachable after the pre-checks; keep honest
            return RouteResult("rejected", f"ledger:{result.reason}")

        verdict = alert = None
        if self.monitor.trained:
            verdict, alert = self.monitor.observe_recorded(snapshot)
        self.inboxes.setdefault(msg_to, []).append(
            Message(msg_from, msg_to, snapshot.content, checked))
        return RouteResult("delivered", tx=checked, verdict=verdict, alert=alert)

    # -- status ------------------------------------------------------------------

    def zone_status(self) -> ZoneStatus:
        followers = [d for d in self.devices.values() if d.device_id != self.master_id]
        return ZoneStatus(
            label=self.label,
            group_id=self.group_id.hex,
            trust=self.monitor.trust_level(),
            ledger_height=self.ledger.height,
            pool_size=len(self.ledger.pool),
            active_devices=sum(1 for d in followers if d.active),
            pending_devices=sum(1 for d in followers if not d.active),
        )


def init_zone(label: str, master_keys: KeyPair, **kwargs) -> Zone:
    """Fresh zone: empty follower set, empty ledger,
    group_id = hash(master_pubkey || label)."""
    return Zone(label, master_keys, **kwargs)
