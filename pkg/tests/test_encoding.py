import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zonewatch.encoding import (
    Reader,
    encode_bytes,
    encode_f64s,
    encode_str,
    encode_u64,
    record,
)
from zonewatch.errors import DecodeError


def test_known_layout():
    # u32 length prefix, big-endian payloads
    assert encode_bytes(b"ab") == b"\x00\x00\x00\x02ab"
    assert encode_u64(1) == b"\x00\x00\x00\x08" + b"\x00" * 7 + b"\x01"
    assert encode_str("A") == b"\x00\x00\x00\x01A"


def test_reader_strict_trailing():
    data = record(encode_u64(5), encode_str("x"))
    r = Reader(data)
    assert r.u64() == 5
    assert r.str() == "x"
    r.expect_end()

    r2 = Reader(data + b"\x00")
    r2.u64()
    r2.str()
    with pytest.raises(DecodeError):
        r2.expect_end()


def test_reader_truncation():
    data = encode_bytes(b"abcdef")[:-2]
    with pytest.raises(DecodeError):
        Reader(data).bytes()


def test_u64_range():
    with pytest.raises(DecodeError):
        encode_u64(-1)
    with pytest.raises(DecodeError):
        encode_u64(1 << 64)
    assert Reader(encode_u64((1 << 64) - 1)).u64() == (1 << 64) - 1


def test_f64s_bit_exact():
    values = np.array([0.1, -1.5e300, 3.14159, 0.0, -0.0])
    decoded = Reader(encode_f64s(values)).f64s()
    assert decoded.tobytes() == values.tobytes()


@given(st.lists(
    st.one_of(
        st.binary(max_size=64),
        st.integers(min_value=0, max_value=(1 << 64) - 1),
        st.text(max_size=32),
    ),
    max_size=8,
))
@settings(max_examples=200)
def test_record_roundtrip(fields):
    parts = []
    for f in fields:
        if isinstance(f, bytes):
            parts.append(encode_bytes(f))
        elif isinstance(f, int):
            parts.append(encode_u64(f))
        else:
            parts.append(encode_str(f))
    r = Reader(record(*parts))
    for f in fields:
        if isinstance(f, bytes):
            assert r.bytes() == f
        elif isinstance(f, int):
            assert r.u64() == f
        else:
            assert r.str() == f
    r.expect_end()
