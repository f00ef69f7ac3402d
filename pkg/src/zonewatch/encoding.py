"""Canonical byte serialization.

Every signed or hashed structure in the package serializes the same way so
digests are reproducible across implementations:

    record   = field_1 ++ field_2 ++ ... (declared field order)
    field    = u32_be(len(payload)) ++ payload
    payload  : bytes   -> raw bytes
               u64     -> 8-byte big-endian unsigned
               str     -> UTF-8 bytes
               f64[]   -> 8-byte IEEE-754 big-endian doubles, concatenated

Decoding is strict: short reads and trailing bytes raise DecodeError.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import DecodeError

__all__ = [
    "encode_bytes", "encode_u64", "encode_str", "encode_f64s", "record",
    "Reader",
]

_U64_MAX = (1 << 64) - 1


def encode_bytes(b: bytes) -> bytes:
    return struct.pack(">I", len(b)) + b


def encode_u64(n: int) -> bytes:
    if not 0 <= n <= _U64_MAX:
        raise DecodeError(f"u64 out of range: {n}")
    return encode_bytes(struct.pack(">Q", n))


def encode_str(s: str) -> bytes:
    return encode_bytes(s.encode("utf-8"))


def encode_f64s(values) -> bytes:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DecodeError("f64 field must be one-dimensional")
    return encode_bytes(struct.pack(f">{arr.size}d", *arr))


def record(*fields: bytes) -> bytes:
    """Concatenate already-encoded fields."""
    return b"".join(fields)


class Reader:
    """Strict sequential decoder for canonical records."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    def _take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise DecodeError(
                f"truncated record: wanted {n} bytes at offset {self._pos}, "
                f"have {len(self._data) - self._pos}"
            )
        out = self._data[self._pos:self._pos + n]
        self._pos += n
        return out

    def bytes(self) -> bytes:
        (n,) = struct.unpack(">I", self._take(4))
        return self._take(n)

    def u64(self) -> int:
        payload = self.bytes()
        if len(payload) != 8:
            raise DecodeError(f"u64 field must be 8 bytes, got {len(payload)}")
        return struct.unpack(">Q", payload)[0]

    def str(self) -> str:
        try:
            return self.bytes().decode("utf-8")
        except UnicodeDecodeError as e:
            raise DecodeError(f"invalid UTF-8 in string field: {e}") from e

    def f64s(self) -> np.ndarray:
        payload = self.bytes()
        if len(payload) % 8 != 0:
            raise DecodeError("f64 field length not a multiple of 8")
        count = len(payload) // 8
        return np.array(struct.unpack(f">{count}d", payload), dtype=np.float64)

    def expect_end(self) -> None:
        if self._pos != len(self._data):
            raise DecodeError(
                f"{len(self._data) - self._pos} trailing bytes after record"
            )
