"""Attack scenarios against the signature protocol and Monte Carlo detection
rates.

Every strategy acts on channel envelopes only. Trial ``t`` of a campaign
seeded with ``seed`` runs the protocol with seed ``seed + t``; the trial's
message is the first thing drawn from that generator, and the adversary gets
its own generator so its choices never shift the protocol's randomness.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from . import codec
from .cipher import (
    BasisTag,
    CipherBlob,
    KeyMismatch,
    SecretKey,
    derive_bases,
    otp_decrypt,
    transform_message,
)
from .protocol import (
    ACCEPT_EPS,
    Envelope,
    Mode,
    ProtocolConfig,
    Session,
    SignedMessage,
    Variant,
)
from .quantum import (
    BELL_VECTORS,
    X_VECTORS,
    BellOutcome,
    QubitSpec,
    XOutcome,
    apply_pauli,
    compose,
    enumerate_joint_distribution,
    fidelity,
    ghz3,
    haar_message,
    pauli_correction,
    project,
)


class AttackKind(enum.Enum):
    BobForgeSignature = "BobForgeSignature"
    OutsiderTamperSignature = "OutsiderTamperSignature"
    OutsiderSwapMessage = "OutsiderSwapMessage"
    KeyCompromiseForgeWithoutMa = "KeyCompromiseForgeWithoutMa"
    AliceDisavow = "AliceDisavow"
    BobDenyReceipt = "BobDenyReceipt"


class DisputeVerdict(enum.Enum):
    SignedByAlice = "SignedByAlice"
    NotSignedByAlice = "NotSignedByAlice"


class ReceiptVerdict(enum.Enum):
    ReceivedByBob = "ReceivedByBob"
    NotReceivedByBob = "NotReceivedByBob"


TAMPER_REGIONS = ("any", "header", "bell", "record")


@dataclass(frozen=True)
class DetectionStats:
    attack: Optional[AttackKind]
    trials: int
    detected: int
    seed: int
    n: int

    def __post_init__(self) -> None:
        if not 0 <= self.detected <= self.trials:
            raise ValueError("detected must lie in [0, trials]")

    @property
    def rate(self) -> float:
        return self.detected / self.trials if self.trials else 0.0

    def merge(self, other: "DetectionStats") -> "DetectionStats":
        if (self.attack, self.n) != (other.attack, other.n):
            raise ValueError("can only merge stats of the same attack and n")
        return replace(
            self,
            trials=self.trials + other.trials,
            detected=self.detected + other.detected,
            seed=min(self.seed, other.seed),
        )

    def to_row(self) -> str:
        name = self.attack.value if self.attack else "None"
        return (
            f"attack={name} n={self.n} trials={self.trials} "
            f"detected={self.detected} rate={self.rate:.4f} seed={self.seed}"
        )


# -- dispute resolution -------------------------------------------------------

def resolve_dispute(
    signature: CipherBlob, K_a: SecretKey, claimed_message: Sequence[QubitSpec]
) -> DisputeVerdict:
    """Arbitrator's ruling on whether ``signature`` is Alice's for the message."""
    try:
        payload = codec.decode_signature(otp_decrypt(K_a, signature))
        claimed = tuple(claimed_message)
        if payload.n != len(claimed):
            return DisputeVerdict.NotSignedByAlice
        expected = transform_message(claimed, derive_bases(K_a, len(claimed)))
    except (codec.DecodeError, KeyMismatch, ValueError):
        return DisputeVerdict.NotSignedByAlice
    if np.array_equal(codec.encode_record(payload.record), codec.encode_record(expected)):
        return DisputeVerdict.SignedByAlice
    return DisputeVerdict.NotSignedByAlice


def resolve_receipt(
    stilde: CipherBlob,
    y_b: CipherBlob,
    K_a: SecretKey,
    K_b: SecretKey,
    claimed_message: Sequence[QubitSpec],
) -> ReceiptVerdict:
    """Ruling on Bob's denial in the undeniable variant.

    Bob received the message iff ``y_b`` opens under his key to that message
    and Alice's bound signature, opened under hers, carries y_b's digest.
    """
    try:
        yb = codec.decode_yb(otp_decrypt(K_b, y_b))
        st = codec.decode_stilde(otp_decrypt(K_a, stilde))
    except (codec.DecodeError, KeyMismatch, ValueError):
        return ReceiptVerdict.NotReceivedByBob
    same_message = np.array_equal(
        codec.encode_message(yb.message), codec.encode_message(tuple(claimed_message))
    )
    bound = np.array_equal(st.yb_digest, codec.digest_bits(y_b))
    if same_message and bound:
        return ReceiptVerdict.ReceivedByBob
    return ReceiptVerdict.NotReceivedByBob


# -- strategies ---------------------------------------------------------------

def _on_signed_message(fn: Callable[[SignedMessage], SignedMessage]):
    def hook(env: Envelope) -> Envelope:
        if isinstance(env.payload, SignedMessage):
            return replace(env, payload=fn(env.payload))
        return env
    return hook


def _fresh_message(n: int, rng: np.random.Generator) -> Tuple[QubitSpec, ...]:
    return tuple(haar_message(n, rng, nondegenerate=True))


def _random_forgery(rng):
    """Bob picks his own message and a signature he cannot open: any bits he
    chooses decrypt under the unknown pad to uniformly random plaintext."""
    def fn(sm: SignedMessage) -> SignedMessage:
        bits = rng.integers(0, 2, size=sm.signature.length, dtype=np.uint8)
        return SignedMessage(_fresh_message(len(sm.message), rng), sm.signature.with_bits(bits))
    return fn


def _malleating_forgery(rng):
    """Bob rewrites the record through the pad.

    He knows the genuine message, so for a guess of the secret bases he can
    XOR the difference between the two records' encodings into the
    ciphertext. A wrong guess on any qubit garbles that entry.
    """
    def fn(sm: SignedMessage) -> SignedMessage:
        n = len(sm.message)
        target = _fresh_message(n, rng)
        guess = [BasisTag(int(b)) for b in rng.integers(0, 2, size=n)]
        delta = codec.encode_record(transform_message(sm.message, guess)) ^ codec.encode_record(
            transform_message(target, guess)
        )
        bits = sm.signature.bits.copy()
        start = codec.signature_regions(n)[2].start
        bits[start : start + len(delta)] ^= delta
        return SignedMessage(target, sm.signature.with_bits(bits))
    return fn


def _tamper(rng, region: str, flips: int):
    if region not in TAMPER_REGIONS:
        raise ValueError(f"region must be one of {TAMPER_REGIONS}")

    def fn(sm: SignedMessage) -> SignedMessage:
        n = len(sm.message)
        if region == "any":
            positions = range(sm.signature.length)
        else:
            header, bell, record = codec.signature_regions(n)
            positions = {"header": header, "bell": bell, "record": record}[region]
        picks = rng.choice(len(positions), size=flips, replace=False)
        return SignedMessage(sm.message, sm.signature.flip(*(positions[int(k)] for k in picks)))
    return fn


def _swap(rng):
    def fn(sm: SignedMessage) -> SignedMessage:
        return SignedMessage(_fresh_message(len(sm.message), rng), sm.signature)
    return fn


def _key_compromise(rng, K_a: SecretKey):
    """Holder of both keys re-signs the genuine message with a guessed M_a.

    The record is exactly right (the bases come from K_a); only the Bell
    outcomes are guessed, uniformly.
    """
    def fn(sm: SignedMessage) -> SignedMessage:
        n = len(sm.message)
        guess = tuple(BellOutcome(int(k)) for k in rng.integers(0, 4, size=n))
        record = transform_message(sm.message, derive_bases(K_a, n))
        plain = codec.encode_signature(codec.SignaturePayload(guess, record))
        pad = K_a.segment(sm.signature.pad_offset, len(plain))
        return SignedMessage(sm.message, sm.signature.with_bits(plain ^ pad))
    return fn


# -- campaigns ----------------------------------------------------------------

def _trial_rngs(seed: int, t: int):
    return np.random.default_rng(seed + t), np.random.default_rng([seed + t, 1])


def trial_message(n: int, seed: int, t: int) -> Tuple[QubitSpec, ...]:
    """The message used in trial ``t`` (non-degenerate Haar-random qubits)."""
    return _fresh_message(n, _trial_rngs(seed, t)[0])


def _run_trial(
    kind: Optional[AttackKind],
    n: int,
    seed: int,
    t: int,
    mode: Mode,
    region: str,
    flips: int,
    forge: str,
) -> bool:
    """One trial; True when the attack is detected (or, honestly, rejected)."""
    message = trial_message(n, seed, t)
    adv = _trial_rngs(seed, t)[1]
    variant = Variant.Undeniable if kind is AttackKind.BobDenyReceipt else Variant.Base
    session = Session(ProtocolConfig(n, seed + t, mode, variant, message))

    if kind is AttackKind.BobForgeSignature:
        strategy = _malleating_forgery(adv) if forge == "malleate" else _random_forgery(adv)
        session.channel.interceptor = _on_signed_message(strategy)
    elif kind is AttackKind.OutsiderTamperSignature:
        session.channel.interceptor = _on_signed_message(_tamper(adv, region, flips))
    elif kind is AttackKind.OutsiderSwapMessage:
        session.channel.interceptor = _on_signed_message(_swap(adv))
    elif kind is AttackKind.KeyCompromiseForgeWithoutMa:
        session.channel.interceptor = _on_signed_message(_key_compromise(adv, session.K_a))

    report = session.run()
    if kind is AttackKind.AliceDisavow:
        # Alice says the signature is not hers; truth is that it is
        verdict = resolve_dispute(session.signing.signature, session.K_a, session.message)
        return verdict is DisputeVerdict.SignedByAlice
    if kind is AttackKind.BobDenyReceipt:
        archive = session.archive
        verdict = resolve_receipt(archive.stilde, archive.y_b, session.K_a, session.K_b, session.message)
        return verdict is ReceiptVerdict.ReceivedByBob
    return not report.accepted


def run_attack(
    kind: Optional[AttackKind],
    trials: int,
    n: int,
    seed: int,
    *,
    mode: Mode = Mode.Deferred,
    region: str = "any",
    flips: int = 1,
    forge: str = "random",
) -> DetectionStats:
    """Detection count over ``trials`` independent runs.

    ``kind=None`` runs the honest protocol; its "detections" are false
    rejections. ``region``/``flips`` steer OutsiderTamperSignature and
    ``forge`` ("random" or "malleate") steers BobForgeSignature.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if n < 1:
        raise ValueError("n must be at least 1")
    detected = sum(
        _run_trial(kind, n, seed, t, mode, region, flips, forge) for t in range(trials)
    )
    return DetectionStats(kind, trials, detected, seed, n)


def forgery_pass_probability(p: QubitSpec, eps: float = ACCEPT_EPS) -> float:
    """Born-rule probability that a uniformly guessed Bell outcome still
    passes Bob's deferred-mode check on qubit ``p``."""
    joint = enumerate_joint_distribution(p)
    target = p.state()
    total = 0.0
    full = compose(p, ghz3())
    for bell in BellOutcome:
        _, after_bell = project(full, (0, 1), BELL_VECTORS[bell])
        for arb in XOutcome:
            weight = sum(joint[(bell, bob, arb)] for bob in XOutcome)
            if weight == 0.0:
                continue
            _, bob_state = project(after_bell, (0,), X_VECTORS[arb])
            passes = sum(
                fidelity(apply_pauli(pauli_correction(guess, arb), bob_state, 0), target) >= 1 - eps
                for guess in BellOutcome
            )
            total += weight * passes / 4
    return total


def expected_forgery_detection(n: int, trials: int, seed: int, eps: float = ACCEPT_EPS) -> Tuple[float, float]:
    """(expected rate, standard error) for KeyCompromiseForgeWithoutMa.

    Each trial is a Bernoulli draw with detection probability
    1 - prod_i pass(p_i) over that trial's message.
    """
    probs = []
    for t in range(trials):
        passing = math.prod(forgery_pass_probability(p, eps) for p in trial_message(n, seed, t))
        probs.append(1.0 - passing)
    probs = np.array(probs)
    return float(probs.mean()), float(math.sqrt(np.sum(probs * (1 - probs))) / trials)
