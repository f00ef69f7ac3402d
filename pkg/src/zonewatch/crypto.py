"""Hashing and signatures: SHA-256 digests and Ed25519 key pairs.

Key generation is deterministic given an Rng, so whole simulations replay
bit-for-bit from a single seed. Secret keys stay on the device side of the
protocol; only 32-byte public keys travel.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .errors import DecodeError
from .rng import Rng

__all__ = ["Digest", "KeyPair", "sha256", "keygen", "sign", "verify",
           "PUBLIC_KEY_LEN", "SIGNATURE_LEN"]

DIGEST_LEN = 32
PUBLIC_KEY_LEN = 32
SECRET_KEY_LEN = 32
SIGNATURE_LEN = 64

_RAW = serialization.Encoding.Raw
_RAW_PUB = serialization.PublicFormat.Raw


@dataclass(frozen=True)
class Digest:
    """32-byte hash value."""

    bytes: bytes

    def __post_init__(self):
        if len(self.bytes) != DIGEST_LEN:
            raise DecodeError(f"digest must be {DIGEST_LEN} bytes, got {len(self.bytes)}")

    @property
    def hex(self) -> str:
        return self.bytes.hex()

    @classmethod
    def from_hex(cls, s: str) -> "Digest":
        try:
            return cls(bytes.fromhex(s))
        except ValueError as e:
            raise DecodeError(f"bad digest hex: {e}") from e

    def __repr__(self):
        return f"Digest({self.hex[:12]}…)"

    ZERO: "Digest" = None  # set below


Digest.ZERO = Digest(b"\x00" * DIGEST_LEN)


def sha256(data: bytes) -> Digest:
    return Digest(hashlib.sha256(data).digest())


@dataclass(frozen=True)
class KeyPair:
    """Ed25519 pair: raw 32-byte public key and 32-byte secret seed."""

    public_key: bytes
    secret_key: bytes

    def __post_init__(self):
        if len(self.public_key) != PUBLIC_KEY_LEN:
            raise DecodeError("public key must be 32 bytes")
        if len(self.secret_key) != SECRET_KEY_LEN:
            raise DecodeError("secret key must be 32 bytes")


def keygen(rng: Rng) -> KeyPair:
    """Deterministically generate a key pair from the rng stream."""
    secret = rng.bytes(SECRET_KEY_LEN)
    sk = Ed25519PrivateKey.from_private_bytes(secret)
    public = sk.public_key().public_bytes(_RAW, _RAW_PUB)
    return KeyPair(public_key=public, secret_key=secret)


def sign(secret_key: bytes, message: bytes) -> bytes:
    """Ed25519 signature; deterministic for a fixed (key, message)."""
    if len(secret_key) != SECRET_KEY_LEN:
        raise DecodeError("secret key must be 32 bytes")
    return Ed25519PrivateKey.from_private_bytes(secret_key).sign(message)


def verify(public_key: bytes, message: bytes, signature: bytes) -> bool:
    """True iff signature is valid for (public_key, message).

    Malformed key or signature lengths raise DecodeError instead of
    returning False, so callers can tell garbage from forgery.
    """
    if len(public_key) != PUBLIC_KEY_LEN:
        raise DecodeError(f"public key must be {PUBLIC_KEY_LEN} bytes, got {len(public_key)}")
    if len(signature) != SIGNATURE_LEN:
        raise DecodeError(f"signature must be {SIGNATURE_LEN} bytes, got {len(signature)}")
    try:
        pk = Ed25519PublicKey.from_public_bytes(public_key)
    except ValueError as e:
        raise DecodeError(f"undecodable public key: {e}") from e
    try:
        pk.verify(signature, message)
        return True
    except InvalidSignature:
        return False
