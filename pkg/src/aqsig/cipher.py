"""Pre-shared keys, key-selected measurement bases, the secret record, and
the one-time pad used for every classical protocol payload."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .quantum import NORM_TOL, SQRT1_2, QubitSpec, norm2

Bits = np.ndarray  # 1-D uint8 array of 0/1


class PadExhausted(RuntimeError):
    """Not enough unused key material left for a one-time pad."""


class KeyMismatch(ValueError):
    """A ciphertext was presented to a key it was not produced with."""


def as_bits(values) -> Bits:
    bits = np.asarray(values, dtype=np.uint8).reshape(-1)
    if bits.size and bits.max() > 1:
        raise ValueError("bit sequences may only contain 0 and 1")
    return bits


@dataclass(eq=False)
class SecretKey:
    """Random key bits plus a cursor marking how many are spent.

    Bits below ``cursor`` are never handed out again by :meth:`take`.
    ``reserve`` moves the cursor without producing pad bits, for material set
    aside for another purpose (the basis prefix of Alice's key).
    """

    key_id: str
    bits: Bits
    cursor: int = 0
    spent: List[Tuple[int, int]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.bits = as_bits(self.bits)
        self.bits.setflags(write=False)
        if not 0 <= self.cursor <= len(self.bits):
            raise ValueError("cursor out of range")

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def remaining(self) -> int:
        return len(self.bits) - self.cursor

    def take(self, count: int) -> int:
        """Claim ``count`` fresh pad bits; return their start offset."""
        if count > self.remaining:
            raise PadExhausted(
                f"key {self.key_id!r}: need {count} pad bits, {self.remaining} left"
            )
        start = self.cursor
        self.cursor += count
        self.spent.append((start, count))
        return start

    def reserve(self, count: int) -> None:
        if count > self.remaining:
            raise PadExhausted(f"key {self.key_id!r}: cannot reserve {count} bits")
        self.cursor += count

    def segment(self, offset: int, length: int) -> Bits:
        if offset < 0 or length < 0 or offset + length > len(self.bits):
            raise ValueError(
                f"pad interval [{offset}, {offset + length}) outside key {self.key_id!r}"
            )
        return self.bits[offset : offset + length]


def generate_key(length: int, rng: np.random.Generator, key_id: str = "K") -> SecretKey:
    if length <= 0:
        raise ValueError("key length must be positive")
    return SecretKey(key_id, rng.integers(0, 2, size=length, dtype=np.uint8))


class BasisTag(enum.Enum):
    Rectilinear = 0
    Diagonal = 1


def derive_bases(key: SecretKey, n: int) -> List[BasisTag]:
    """Bit 1 selects the diagonal basis, bit 0 the rectilinear one.

    Reads the first ``n`` key bits and leaves the cursor alone.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if n > len(key):
        raise ValueError(f"key {key.key_id!r} has {len(key)} bits, {n} needed for bases")
    return [BasisTag(int(b)) for b in key.bits[:n]]


@dataclass(frozen=True)
class RecordEntry:
    tag: BasisTag
    amp0: complex
    amp1: complex

    def __post_init__(self) -> None:
        object.__setattr__(self, "amp0", complex(self.amp0))
        object.__setattr__(self, "amp1", complex(self.amp1))
        for z in (self.amp0, self.amp1):
            if not (math.isfinite(z.real) and math.isfinite(z.imag)):
                raise ValueError("record amplitudes must be finite")
        norm = norm2(self.amp0, self.amp1)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"record entry not normalized: {norm!r}")


RotatedRecord = Tuple[RecordEntry, ...]


def _rotate(a: complex, b: complex) -> Tuple[complex, complex]:
    return (a + b) * SQRT1_2, (a - b) * SQRT1_2


def transform_message(message: Sequence[QubitSpec], bases: Sequence[BasisTag]) -> RotatedRecord:
    """Express each message qubit in its key-selected basis.

    Deterministic: the record is the message written in the chosen frame, so
    the arbitrator can recompute it bit for bit.
    """
    if len(message) != len(bases):
        raise ValueError(f"{len(message)} qubits but {len(bases)} bases")
    out = []
    for p, tag in zip(message, bases):
        if tag is BasisTag.Diagonal:
            a, b = _rotate(p.alpha, p.beta)
        else:
            a, b = p.alpha, p.beta
        out.append(RecordEntry(tag, complex(a), complex(b)))
    return tuple(out)


def untransform_record(record: RotatedRecord) -> List[QubitSpec]:
    # the Hadamard-like change of basis is its own inverse
    out = []
    for e in record:
        if e.tag is BasisTag.Diagonal:
            a, b = _rotate(e.amp0, e.amp1)
        else:
            a, b = e.amp0, e.amp1
        out.append(QubitSpec(a, b))
    return out


def records_equal(a: RotatedRecord, b: RotatedRecord, tolerance: float = 1e-9) -> bool:
    """Same tags and, entry by entry, fidelity at least ``1 - tolerance``."""
    if len(a) != len(b):
        return False
    for x, y in zip(a, b):
        if x.tag is not y.tag:
            return False
        overlap = x.amp0.conjugate() * y.amp0 + x.amp1.conjugate() * y.amp1
        if abs(overlap) ** 2 < 1.0 - tolerance:
            return False
    return True


@dataclass(frozen=True)
class CipherBlob:
    bits: Bits
    pad_key_id: str
    pad_offset: int

    @property
    def length(self) -> int:
        return len(self.bits)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CipherBlob):
            return NotImplemented
        return (
            self.pad_key_id == other.pad_key_id
            and self.pad_offset == other.pad_offset
            and np.array_equal(self.bits, other.bits)
        )

    def with_bits(self, bits) -> "CipherBlob":
        return CipherBlob(as_bits(bits), self.pad_key_id, self.pad_offset)

    def flip(self, *positions: int) -> "CipherBlob":
        bits = self.bits.copy()
        for pos in positions:
            bits[pos] ^= 1
        return self.with_bits(bits)


def otp_encrypt(key: SecretKey, plaintext) -> CipherBlob:
    plaintext = as_bits(plaintext)
    offset = key.take(len(plaintext))
    return CipherBlob(plaintext ^ key.segment(offset, len(plaintext)), key.key_id, offset)


def otp_decrypt(key: SecretKey, blob: CipherBlob) -> Bits:
    if blob.pad_key_id != key.key_id:
        raise KeyMismatch(f"blob padded with {blob.pad_key_id!r}, not {key.key_id!r}")
    return blob.bits ^ key.segment(blob.pad_offset, blob.length)
