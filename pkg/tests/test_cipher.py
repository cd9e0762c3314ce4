import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aqsig.cipher import (
    BasisTag,
    CipherBlob,
    KeyMismatch,
    PadExhausted,
    RecordEntry,
    SecretKey,
    derive_bases,
    generate_key,
    otp_decrypt,
    otp_encrypt,
    records_equal,
    transform_message,
    untransform_record,
)
from aqsig.quantum import QubitSpec, haar_message

from conftest import qubit_specs

R = 1 / math.sqrt(2)


def key_of(bits, key_id="K"):
    return SecretKey(key_id, np.array(bits, dtype=np.uint8))


class TestSecretKey:
    def test_generate_is_seeded(self):
        a = generate_key(256, np.random.default_rng(5))
        b = generate_key(256, np.random.default_rng(5))
        assert np.array_equal(a.bits, b.bits)
        assert a.cursor == 0

    def test_generate_is_balanced(self):
        key = generate_key(10_000, np.random.default_rng(6))
        assert 0.45 <= key.bits.mean() <= 0.55

    @pytest.mark.parametrize("length", [0, -3])
    def test_generate_rejects_empty(self, length):
        with pytest.raises(ValueError):
            generate_key(length, np.random.default_rng(0))

    def test_take_advances_cursor(self):
        key = key_of([0] * 10)
        assert key.take(4) == 0
        assert key.take(3) == 4
        assert key.cursor == 7
        assert key.spent == [(0, 4), (4, 3)]

    def test_take_past_end(self):
        key = key_of([0] * 10)
        key.take(8)
        with pytest.raises(PadExhausted):
            key.take(3)
        assert key.cursor == 8

    def test_reserve_is_not_spent_as_pad(self):
        key = key_of([0] * 10)
        key.reserve(4)
        assert key.cursor == 4
        assert key.spent == []
        assert key.take(2) == 4

    def test_rejects_non_bits(self):
        with pytest.raises(ValueError):
            key_of([0, 2])

    def test_bits_are_read_only(self):
        key = key_of([0, 1])
        with pytest.raises(ValueError):
            key.bits[0] = 1


class TestBases:
    def test_bit_to_basis(self):
        key = key_of([1, 0, 1, 1])
        assert derive_bases(key, 3) == [BasisTag.Diagonal, BasisTag.Rectilinear, BasisTag.Diagonal]

    def test_cursor_untouched(self):
        key = key_of([1, 0, 1, 1])
        derive_bases(key, 4)
        assert key.cursor == 0

    def test_empty(self):
        assert derive_bases(key_of([1]), 0) == []

    def test_key_too_short(self):
        with pytest.raises(ValueError):
            derive_bases(key_of([1, 0]), 3)


class TestTransform:
    def test_rectilinear_keeps_amplitudes(self):
        (e,) = transform_message([QubitSpec(1, 0)], [BasisTag.Rectilinear])
        assert (e.tag, e.amp0, e.amp1) == (BasisTag.Rectilinear, 1, 0)

    def test_diagonal_of_zero(self):
        (e,) = transform_message([QubitSpec(1, 0)], [BasisTag.Diagonal])
        assert e.amp0 == pytest.approx(R)
        assert e.amp1 == pytest.approx(R)

    def test_diagonal_of_minus(self):
        (e,) = transform_message([QubitSpec(R, -R)], [BasisTag.Diagonal])
        assert abs(e.amp0) == pytest.approx(0, abs=1e-15)
        assert e.amp1 == pytest.approx(1)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            transform_message([QubitSpec(1, 0)], [])

    def test_deterministic(self, rng):
        msg = haar_message(5, rng)
        bases = [BasisTag(k % 2) for k in range(5)]
        assert transform_message(msg, bases) == transform_message(msg, bases)

    @given(qubit_specs, st.sampled_from(list(BasisTag)))
    def test_norm_preserving_and_invertible(self, p, tag):
        (e,) = transform_message([p], [tag])
        assert abs(abs(e.amp0) ** 2 + abs(e.amp1) ** 2 - 1) <= 1e-9
        (back,) = untransform_record((e,))
        assert abs(back.alpha - p.alpha) <= 1e-12
        assert abs(back.beta - p.beta) <= 1e-12

    def test_entry_must_be_normalized(self):
        with pytest.raises(ValueError):
            RecordEntry(BasisTag.Rectilinear, 1, 1)

    def test_entry_must_be_finite(self):
        with pytest.raises(ValueError):
            RecordEntry(BasisTag.Rectilinear, complex("nan"), 0)


class TestRecordsEqual:
    def test_phase_insensitive(self):
        a = (RecordEntry(BasisTag.Rectilinear, 1, 0),)
        b = (RecordEntry(BasisTag.Rectilinear, -1, 0),)
        assert records_equal(a, b)

    def test_tag_sensitive(self):
        a = (RecordEntry(BasisTag.Rectilinear, 1, 0),)
        b = (RecordEntry(BasisTag.Diagonal, 1, 0),)
        assert not records_equal(a, b)

    def test_state_sensitive(self):
        a = (RecordEntry(BasisTag.Rectilinear, 1, 0),)
        b = (RecordEntry(BasisTag.Rectilinear, R, R),)
        assert not records_equal(a, b)

    def test_length_sensitive(self):
        a = (RecordEntry(BasisTag.Rectilinear, 1, 0),)
        assert not records_equal(a, a + a)


class TestOneTimePad:
    def test_worked_example(self):
        key = key_of([1, 1, 0, 0])
        blob = otp_encrypt(key, [1, 0, 1, 0])
        assert blob.bits.tolist() == [0, 1, 1, 0]
        assert (blob.pad_key_id, blob.pad_offset, blob.length) == ("K", 0, 4)

    def test_round_trip(self):
        rng = np.random.default_rng(8)
        key = generate_key(1000 * 40, rng)
        for _ in range(1000):
            plain = rng.integers(0, 2, size=int(rng.integers(1, 40)), dtype=np.uint8)
            assert np.array_equal(otp_decrypt(key, otp_encrypt(key, plain)), plain)

    def test_intervals_are_disjoint(self):
        rng = np.random.default_rng(9)
        key = generate_key(500, rng)
        used = set()
        for size in (10, 100, 37, 200):
            blob = otp_encrypt(key, np.zeros(size, np.uint8))
            span = set(range(blob.pad_offset, blob.pad_offset + blob.length))
            assert not span & used
            used |= span

    def test_zero_plaintext_exposes_pad(self):
        key = key_of([1, 0, 1, 1])
        assert otp_encrypt(key, [0, 0, 0, 0]).bits.tolist() == [1, 0, 1, 1]

    def test_flip_is_local(self):
        key = generate_key(64, np.random.default_rng(1))
        plain = np.zeros(64, np.uint8)
        blob = otp_encrypt(key, plain).flip(5, 17)
        assert np.flatnonzero(otp_decrypt(key, blob)).tolist() == [5, 17]

    def test_wrong_key(self):
        blob = otp_encrypt(key_of([1, 0], "K_a"), [1, 1])
        with pytest.raises(KeyMismatch):
            otp_decrypt(key_of([1, 0], "K_b"), blob)

    def test_interval_outside_key(self):
        key = key_of([1, 0])
        with pytest.raises(ValueError):
            otp_decrypt(key, CipherBlob(np.zeros(4, np.uint8), "K", 0))

    def test_exhaustion(self):
        key = key_of([1, 0, 1])
        with pytest.raises(PadExhausted):
            otp_encrypt(key, [0, 0, 0, 0])

    def test_blob_equality(self):
        a = CipherBlob(np.array([1, 0], np.uint8), "K", 3)
        assert a == CipherBlob(np.array([1, 0], np.uint8), "K", 3)
        assert a != a.flip(0)
        assert a != CipherBlob(np.array([1, 0], np.uint8), "K", 4)

    def test_indistinguishability_smoke(self):
        rng = np.random.default_rng(10)
        plain = rng.integers(0, 2, size=128, dtype=np.uint8)
        cts = np.array(
            [otp_encrypt(generate_key(128, rng), plain).bits for _ in range(10_000)]
        )
        means = cts.mean(axis=0)
        assert means.min() >= 0.45 and means.max() <= 0.55

    @settings(max_examples=50)
    @given(st.lists(st.integers(0, 1), min_size=1, max_size=200), st.integers(0, 2**32 - 1))
    def test_decrypt_inverts_encrypt(self, plain, seed):
        key = generate_key(len(plain), np.random.default_rng(seed))
        assert otp_decrypt(key, otp_encrypt(key, plain)).tolist() == plain
