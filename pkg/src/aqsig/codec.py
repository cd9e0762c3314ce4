"""Canonical bit layouts for every classical payload in the protocol.

All integers are big-endian, all reals IEEE-754 binary64 big-endian.

signature   u32 n | n x 2-bit Bell code | n x (1 basis bit, 4 x f64)
stilde      signature layout | 256-bit SHA-256 digest of y_b
message     u32 n | n x 4 x f64 (re a, im a, re b, im b)
x outcomes  u32 m | m x 1 bit (PlusX = 0)
bell list   u32 m | m x 2-bit Bell code
blob        u8 len(key_id) | key_id utf-8 | u64 pad_offset | u64 length | bits
y_b         x outcomes (Bob) | blob (signature) | message
y_tb        bell list (Alice) | x outcomes (arbitrator) | x outcomes (Bob)
            | 1-bit gamma | blob (signature or stilde)

Field order keeps long runs of predictable zero bits (empty or small
counts) apart, so no 64-bit stretch of pad shows through a ciphertext
verbatim.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .cipher import BasisTag, Bits, CipherBlob, RecordEntry, RotatedRecord, as_bits
from .quantum import BellOutcome, QubitSpec, XOutcome

DIGEST_BITS = 256
ENTRY_BITS = 1 + 4 * 64


class DecodeError(ValueError):
    """Bits do not parse as the expected payload."""


class BitWriter:
    def __init__(self) -> None:
        self._chunks: List[np.ndarray] = []

    def uint(self, value: int, width: int) -> "BitWriter":
        if not 0 <= value < (1 << width):
            raise ValueError(f"{value} does not fit in {width} bits")
        raw = value.to_bytes((width + 7) // 8, "big")
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
        self._chunks.append(bits[len(bits) - width :])
        return self

    def f64(self, x: float) -> "BitWriter":
        self._chunks.append(np.unpackbits(np.frombuffer(struct.pack(">d", x), dtype=np.uint8)))
        return self

    def complex(self, z: complex) -> "BitWriter":
        return self.f64(z.real).f64(z.imag)

    def bits(self, bits) -> "BitWriter":
        self._chunks.append(as_bits(bits))
        return self

    def getvalue(self) -> Bits:
        if not self._chunks:
            return np.zeros(0, dtype=np.uint8)
        return np.concatenate(self._chunks).astype(np.uint8)


class BitReader:
    def __init__(self, bits) -> None:
        self._bits = as_bits(bits)
        self._pos = 0

    @property
    def remaining(self) -> int:
        return len(self._bits) - self._pos

    def bits(self, count: int) -> Bits:
        if count < 0 or count > self.remaining:
            raise DecodeError(f"need {count} bits, {self.remaining} left")
        out = self._bits[self._pos : self._pos + count]
        self._pos += count
        return out

    def uint(self, width: int) -> int:
        value = 0
        for b in self.bits(width):
            value = (value << 1) | int(b)
        return value

    def f64(self) -> float:
        return struct.unpack(">d", np.packbits(self.bits(64)).tobytes())[0]

    def complex(self) -> complex:
        re = self.f64()
        return complex(re, self.f64())

    def count(self, item_bits: int) -> int:
        """Read a u32 element count and check that many items can follow."""
        n = self.uint(32)
        if n * item_bits > self.remaining:
            raise DecodeError(f"count {n} exceeds the remaining {self.remaining} bits")
        return n

    def done(self) -> None:
        if self.remaining:
            raise DecodeError(f"{self.remaining} trailing bits")


# -- elementary fields ------------------------------------------------------

def _write_bells(w: BitWriter, bells: Sequence[BellOutcome]) -> None:
    for b in bells:
        w.uint(b.value, 2)


def _read_bells(r: BitReader, n: int) -> List[BellOutcome]:
    return [BellOutcome(r.uint(2)) for _ in range(n)]


def _write_entry(w: BitWriter, e: RecordEntry) -> None:
    w.uint(e.tag.value, 1).complex(e.amp0).complex(e.amp1)


def _read_entry(r: BitReader) -> RecordEntry:
    tag = BasisTag(r.uint(1))
    amp0 = r.complex()
    amp1 = r.complex()
    try:
        return RecordEntry(tag, amp0, amp1)
    except ValueError as exc:
        raise DecodeError(str(exc)) from exc


def encode_record(record: RotatedRecord) -> Bits:
    w = BitWriter()
    for e in record:
        _write_entry(w, e)
    return w.getvalue()


def write_xs(w: BitWriter, xs: Sequence[XOutcome]) -> None:
    w.uint(len(xs), 32)
    for x in xs:
        w.uint(x.value, 1)


def read_xs(r: BitReader) -> List[XOutcome]:
    m = r.count(1)
    return [XOutcome(r.uint(1)) for _ in range(m)]


def write_bell_list(w: BitWriter, bells: Sequence[BellOutcome]) -> None:
    w.uint(len(bells), 32)
    _write_bells(w, bells)


def read_bell_list(r: BitReader) -> List[BellOutcome]:
    return _read_bells(r, r.count(2))


def write_message(w: BitWriter, message: Sequence[QubitSpec]) -> None:
    w.uint(len(message), 32)
    for p in message:
        w.complex(p.alpha).complex(p.beta)


def read_message(r: BitReader) -> List[QubitSpec]:
    n = r.count(256)
    out = []
    for _ in range(n):
        a = r.complex()
        b = r.complex()
        try:
            out.append(QubitSpec(a, b))
        except ValueError as exc:
            raise DecodeError(str(exc)) from exc
    return out


def write_blob(w: BitWriter, blob: CipherBlob) -> None:
    key_id = blob.pad_key_id.encode("utf-8")
    w.uint(len(key_id), 8)
    for byte in key_id:
        w.uint(byte, 8)
    w.uint(blob.pad_offset, 64).uint(blob.length, 64).bits(blob.bits)


def read_blob(r: BitReader) -> CipherBlob:
    size = r.uint(8)
    raw = bytes(r.uint(8) for _ in range(size))
    try:
        key_id = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DecodeError("key id is not utf-8") from exc
    offset = r.uint(64)
    length = r.uint(64)
    return CipherBlob(r.bits(length).copy(), key_id, offset)


# -- payloads ---------------------------------------------------------------

@dataclass(frozen=True)
class SignaturePayload:
    bell_outcomes: Tuple[BellOutcome, ...]
    record: RotatedRecord

    def __post_init__(self) -> None:
        object.__setattr__(self, "bell_outcomes", tuple(self.bell_outcomes))
        object.__setattr__(self, "record", tuple(self.record))
        if len(self.bell_outcomes) != len(self.record):
            raise ValueError("Bell outcome and record lengths differ")

    @property
    def n(self) -> int:
        return len(self.record)


def _write_signature(w: BitWriter, payload: SignaturePayload) -> None:
    w.uint(payload.n, 32)
    _write_bells(w, payload.bell_outcomes)
    for e in payload.record:
        _write_entry(w, e)


def _read_signature(r: BitReader) -> SignaturePayload:
    n = r.count(2 + ENTRY_BITS)
    bells = _read_bells(r, n)
    record = tuple(_read_entry(r) for _ in range(n))
    return SignaturePayload(tuple(bells), record)


def encode_signature(payload: SignaturePayload) -> Bits:
    w = BitWriter()
    _write_signature(w, payload)
    return w.getvalue()


def decode_signature(bits) -> SignaturePayload:
    r = BitReader(bits)
    payload = _read_signature(r)
    r.done()
    return payload


def signature_regions(n: int) -> Tuple[range, range, range]:
    """Bit ranges of (header, Bell codes, record) in an encoded signature."""
    bell_start = 32
    record_start = bell_start + 2 * n
    return (
        range(0, bell_start),
        range(bell_start, record_start),
        range(record_start, record_start + n * ENTRY_BITS),
    )


def digest_bits(blob: CipherBlob) -> Bits:
    """SHA-256 over the serialized blob, as 256 bits."""
    w = BitWriter()
    write_blob(w, blob)
    bits = w.getvalue()
    h = hashlib.sha256()
    h.update(len(bits).to_bytes(8, "big"))
    h.update(np.packbits(bits).tobytes())
    return np.unpackbits(np.frombuffer(h.digest(), dtype=np.uint8))


@dataclass(frozen=True)
class STildePayload:
    signature: SignaturePayload
    yb_digest: Bits

    def __eq__(self, other) -> bool:
        if not isinstance(other, STildePayload):
            return NotImplemented
        return self.signature == other.signature and np.array_equal(self.yb_digest, other.yb_digest)


def encode_stilde(payload: STildePayload) -> Bits:
    w = BitWriter()
    _write_signature(w, payload.signature)
    w.bits(payload.yb_digest)
    return w.getvalue()


def decode_stilde(bits) -> STildePayload:
    r = BitReader(bits)
    sig = _read_signature(r)
    digest = r.bits(DIGEST_BITS).copy()
    r.done()
    return STildePayload(sig, digest)


@dataclass(frozen=True)
class YbPayload:
    bob_outcomes: Tuple[XOutcome, ...]
    signature: CipherBlob
    message: Tuple[QubitSpec, ...]


def encode_yb(payload: YbPayload) -> Bits:
    w = BitWriter()
    write_xs(w, payload.bob_outcomes)
    write_blob(w, payload.signature)
    write_message(w, payload.message)
    return w.getvalue()


def decode_yb(bits) -> YbPayload:
    r = BitReader(bits)
    xs = tuple(read_xs(r))
    blob = read_blob(r)
    message = tuple(read_message(r))
    r.done()
    return YbPayload(xs, blob, message)


@dataclass(frozen=True)
class YtbPayload:
    alice_outcomes: Tuple[BellOutcome, ...]
    bob_outcomes: Tuple[XOutcome, ...]
    arb_outcomes: Tuple[XOutcome, ...]
    gamma: int
    signature: CipherBlob


def encode_ytb(payload: YtbPayload) -> Bits:
    if payload.gamma not in (0, 1):
        raise ValueError("gamma must be 0 or 1")
    w = BitWriter()
    write_bell_list(w, payload.alice_outcomes)
    write_xs(w, payload.arb_outcomes)
    write_xs(w, payload.bob_outcomes)
    w.uint(payload.gamma, 1)
    write_blob(w, payload.signature)
    return w.getvalue()


def decode_ytb(bits) -> YtbPayload:
    r = BitReader(bits)
    bells = tuple(read_bell_list(r))
    arb = tuple(read_xs(r))
    bob = tuple(read_xs(r))
    gamma = r.uint(1)
    blob = read_blob(r)
    r.done()
    return YtbPayload(bells, bob, arb, gamma, blob)


def encode_message(message: Sequence[QubitSpec]) -> Bits:
    w = BitWriter()
    write_message(w, message)
    return w.getvalue()


def decode_message(bits) -> List[QubitSpec]:
    r = BitReader(bits)
    out = read_message(r)
    r.done()
    return out


def to_hex(bits) -> str:
    """Hex of the bit string, zero-padded on the right to whole bytes."""
    return np.packbits(as_bits(bits)).tobytes().hex()
