"""Append-only hash-chained ledger, one per zone.

Submitted transactions wait in a pool; when the pool reaches the configured
blocksize the block is sealed in the same call. Blocks link through the
previous header hash and commit to their transactions through tx_root (hash
of the concatenated transaction digests). Each serialized block also carries
its own header hash so every byte of an exported chain is covered by some
recomputable commitment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import crypto
from .crypto import Digest, sha256
from .encoding import Reader, encode_bytes, encode_str, encode_u64, record
from .errors import DecodeError, LedgerError, NotFoundError

__all__ = [
    "Transaction", "BlockHeader", "Block", "Ledger", "SubmitResult",
    "make_transaction", "tx_root", "export_ledger", "import_ledger",
    "DEFAULT_BLOCKSIZE",
]

DEFAULT_BLOCKSIZE = 10

_LEDGER_MAGIC = "zonewatch-ledger"
_LEDGER_VERSION = 1


@dataclass(frozen=True)
class Transaction:
    seq_id: int
    device_id: str
    payload_hash: Digest
    timestamp: int
    signature: bytes

    def signing_bytes(self) -> bytes:
        return record(
            encode_u64(self.seq_id),
            encode_str(self.device_id),
            encode_bytes(self.payload_hash.bytes),
            encode_u64(self.timestamp),
        )

    def to_bytes(self) -> bytes:
        return self.signing_bytes() + encode_bytes(self.signature)

    @classmethod
    def read_from(cls, r: Reader) -> "Transaction":
        seq = r.u64()
        dev = r.str()
        payload_hash = Digest(r.bytes())
        ts = r.u64()
        sig = r.bytes()
        if len(sig) != crypto.SIGNATURE_LEN:
            raise DecodeError("transaction signature must be 64 bytes")
        return cls(seq, dev, payload_hash, ts, sig)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Transaction":
        r = Reader(data)
        tx = cls.read_from(r)
        r.expect_end()
        return tx

    def digest(self) -> Digest:
        return sha256(self.to_bytes())

    def verify(self, public_key: bytes) -> bool:
        return crypto.verify(public_key, self.signing_bytes(), self.signature)


def make_transaction(seq_id: int, device_id: str, payload_hash: Digest,
                     timestamp: int, secret_key: bytes) -> Transaction:
    """Build and sign a transaction on the device side."""
    unsigned = Transaction(seq_id, device_id, payload_hash, timestamp, b"\x00" * 64)
    sig = crypto.sign(secret_key, unsigned.signing_bytes())
    return Transaction(seq_id, device_id, payload_hash, timestamp, sig)


def tx_root(transactions) -> Digest:
    """Hash over the concatenated transaction digests, in block order."""
    return sha256(b"".join(tx.digest().bytes for tx in transactions))


@dataclass(frozen=True)
class BlockHeader:
    prev_hash: Digest
    tx_root: Digest
    timestamp: int
    height: int

    def to_bytes(self) -> bytes:
        return record(
            encode_bytes(self.prev_hash.bytes),
            encode_bytes(self.tx_root.bytes),
            encode_u64(self.timestamp),
            encode_u64(self.height),
        )

    def digest(self) -> Digest:
        return sha256(self.to_bytes())


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    transactions: tuple
    header_hash: Digest

    def to_bytes(self) -> bytes:
        parts = [encode_bytes(self.header.to_bytes()),
                 encode_u64(len(self.transactions))]
        parts.extend(encode_bytes(tx.to_bytes()) for tx in self.transactions)
        parts.append(encode_bytes(self.header_hash.bytes))
        return record(*parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Block":
        r = Reader(data)
        hr = Reader(r.bytes())
        header = BlockHeader(Digest(hr.bytes()), Digest(hr.bytes()),
                             hr.u64(), hr.u64())
        hr.expect_end()
        count = r.u64()
        txs = tuple(Transaction.from_bytes(r.bytes()) for _ in range(count))
        header_hash = Digest(r.bytes())
        r.expect_end()
        return cls(header, txs, header_hash)


@dataclass(frozen=True)
class SubmitResult:
    accepted: bool
    reason: Optional[str] = None
    sealed: Optional[Block] = None


@dataclass
class Ledger:
    """Single-writer chain state for one zone."""

    blocksize: int = DEFAULT_BLOCKSIZE
    chain: list = field(default_factory=list)
    pool: list = field(default_factory=list)
    registry: dict = field(default_factory=dict)   # device_id -> public key
    index: dict = field(default_factory=dict)      # payload hash hex -> (height, pos)
    last_seq: int = 0

    def __post_init__(self):
        if self.blocksize < 1:
            raise LedgerError(f"blocksize must be >= 1, got {self.blocksize}")

    @property
    def height(self) -> int:
        return len(self.chain)

    def register_device(self, device_id: str, public_key: bytes) -> None:
        """Pin a device's verification key; first registration wins."""
        self.registry.setdefault(device_id, public_key)

    def submit(self, tx: Transaction, device_pubkey: bytes) -> SubmitResult:
        """Validate and pool a transaction; seals a block when full."""
        key = self.registry.get(tx.device_id, device_pubkey)
        if not tx.verify(key):
            return SubmitResult(False, "invalid-signature")
        if tx.seq_id <= self.last_seq:
            return SubmitResult(False, "replay")
        self.registry.setdefault(tx.device_id, key)
        self.last_seq = tx.seq_id
        self.pool.append(tx)
        sealed = None
        if len(self.pool) >= self.blocksize:
            sealed = self.seal_block()
        return SubmitResult(True, sealed=sealed)

    def seal_block(self) -> Block:
        if not self.pool:
            raise LedgerError("cannot seal: transaction pool is empty")
        txs = tuple(self.pool)
        prev = self.chain[-1].header_hash if self.chain else Digest.ZERO
        header = BlockHeader(prev, tx_root(txs), txs[-1].timestamp, len(self.chain))
        block = Block(header, txs, header.digest())
        self.chain.append(block)
        for pos, tx in enumerate(txs):
            self.index.setdefault(tx.payload_hash.hex, (header.height, pos))
        self.pool.clear()
        return block

    def flush(self) -> Optional[Block]:
        """Seal a short final block so no pooled data is lost at shutdown."""
        return self.seal_block() if self.pool else None

    def verify_chain(self) -> Optional[int]:
        """None if every link, root and signature recomputes; else the
        lowest offending height."""
        prev = Digest.ZERO
        for i, block in enumerate(self.chain):
            h = block.header
            if h.height != i or h.prev_hash != prev:
                return i
            if block.header_hash != h.digest():
                return i
            if h.tx_root != tx_root(block.transactions):
                return i
            for tx in block.transactions:
                key = self.registry.get(tx.device_id)
                if key is None or not tx.verify(key):
                    return i
            prev = block.header_hash
        return None

    def lookup(self, hash_id: Digest):
        """Resolve a payload hash to its sealed transaction and location."""
        loc = self.index.get(hash_id.hex)
        if loc is None:
            raise NotFoundError(f"no sealed transaction with payload hash {hash_id.hex}")
        height, pos = loc
        return self.chain[height].transactions[pos], height, pos

    @classmethod
    def from_parts(cls, blocksize: int, registry: dict, chain: list) -> "Ledger":
        led = cls(blocksize=blocksize)
        led.registry = dict(registry)
        led.chain = list(chain)
        for height, block in enumerate(led.chain):
            for pos, tx in enumerate(block.transactions):
                led.index.setdefault(tx.payload_hash.hex, (height, pos))
                led.last_seq = max(led.last_seq, tx.seq_id)
        return led


def _registry_bytes(registry: dict) -> bytes:
    parts = [encode_u64(len(registry))]
    for device_id in sorted(registry):
        parts.append(encode_str(device_id))
        parts.append(encode_bytes(registry[device_id]))
    return record(*parts)


def _parse_registry(data: bytes) -> dict:
    r = Reader(data)
    count = r.u64()
    registry = {}
    for _ in range(count):
        device_id = r.str()
        key = r.bytes()
        if len(key) != crypto.PUBLIC_KEY_LEN:
            raise DecodeError("registry public key must be 32 bytes")
        registry[device_id] = key
    r.expect_end()
    return registry


def export_ledger(ledger: Ledger) -> str:
    """Newline-delimited record file: header, registry, one block per line."""
    head = record(encode_str(_LEDGER_MAGIC), encode_u64(_LEDGER_VERSION),
                  encode_u64(ledger.blocksize))
    lines = [f"H {head.hex()}", f"R {_registry_bytes(ledger.registry).hex()}"]
    lines.extend(f"B {block.to_bytes().hex()}" for block in ledger.chain)
    return "\n".join(lines) + "\n"


def import_ledger(text: str) -> Ledger:
    """Parse an exported chain. Structural damage raises DecodeError; use
    verify_chain() afterwards for cryptographic checks."""
    blocksize = None
    registry = None
    blocks = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        kind, _, hexpart = line.partition(" ")
        try:
            payload = bytes.fromhex(hexpart)
        except ValueError as e:
            raise DecodeError(f"line {lineno}: bad hex: {e}") from e
        if kind == "H":
            r = Reader(payload)
            magic, version = r.str(), r.u64()
            if magic != _LEDGER_MAGIC or version != _LEDGER_VERSION:
                raise DecodeError(f"line {lineno}: unsupported ledger file {magic!r} v{version}")
            blocksize = r.u64()
            r.expect_end()
        elif kind == "R":
            registry = _parse_registry(payload)
        elif kind == "B":
            blocks.append(Block.from_bytes(payload))
        else:
            raise DecodeError(f"line {lineno}: unknown record kind {kind!r}")
    if blocksize is None or registry is None:
        raise DecodeError("ledger file missing header or registry record")
    return Ledger.from_parts(blocksize, registry, blocks)
