"""Initial, signing and verification phases run between Alice, Bob and the
arbitrator over an in-memory channel.

Two verification orderings are supported. In ``Mode.Deferred`` Bob keeps his
GHZ shares unmeasured until Alice's Bell outcomes and the arbitrator's x
outcomes arrive, applies the Pauli correction to the physical qubit and
compares it with the received message. In ``Mode.PaperOrder`` Bob measures
first; the final check is then computed from the classical message
description (see :func:`reconstruct_paper_order`).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import codec
from .cipher import (
    BasisTag,
    CipherBlob,
    KeyMismatch,
    PadExhausted,
    RecordEntry,
    RotatedRecord,
    SecretKey,
    derive_bases,
    generate_key,
    otp_decrypt,
    otp_encrypt,
    transform_message,
)
from .quantum import (
    BELL_VECTORS,
    EXACT_TOL,
    X_VECTORS,
    BellOutcome,
    PureState,
    QubitSpec,
    XOutcome,
    apply_pauli,
    bell_measure,
    compose,
    fidelity,
    ghz3,
    haar_message,
    pauli_correction,
    project,
    x_measure,
)

ACCEPT_EPS = 1e-6


class PartyId(enum.Enum):
    Alice = "Alice"
    Bob = "Bob"
    Arbitrator = "Arbitrator"


class Mode(enum.Enum):
    PaperOrder = "paper"
    Deferred = "deferred"


class Variant(enum.Enum):
    Base = "base"
    Undeniable = "undeniable"


class RejectReason(enum.Enum):
    GammaZero = "GammaZero"
    StateMismatch = "StateMismatch"
    DecryptError = "DecryptError"


# -- GHZ registers ------------------------------------------------------------

SHARE_OWNERS = {"a": PartyId.Alice, "A": PartyId.Arbitrator, "b": PartyId.Bob}


@dataclass
class Register:
    """One live register; ``labels[k]`` names the holder of qubit k.

    "P" is the message qubit, "a"/"A"/"b" the GHZ shares of Alice, the
    arbitrator and Bob.
    """

    state: PureState
    labels: List[str]

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"share {label!r} is no longer live in this register") from None

    def measure_x(self, label: str, rng: np.random.Generator) -> XOutcome:
        k = self.index(label)
        outcome, self.state = x_measure(self.state, k, rng)
        del self.labels[k]
        return outcome


@dataclass
class GhzAllocation:
    registers: List[Register]

    def __len__(self) -> int:
        return len(self.registers)

    def shares(self, party: PartyId) -> List[Tuple[int, str]]:
        return [
            (i, label)
            for i, reg in enumerate(self.registers)
            for label in reg.labels
            if SHARE_OWNERS.get(label) is party
        ]


# -- channel and transcript ---------------------------------------------------

@dataclass(frozen=True)
class SignedMessage:
    message: Tuple[QubitSpec, ...]
    signature: CipherBlob

    kind = "signed_message"

    def bits(self) -> np.ndarray:
        w = codec.BitWriter()
        codec.write_message(w, self.message)
        codec.write_blob(w, self.signature)
        return w.getvalue()


@dataclass(frozen=True)
class YB:
    blob: CipherBlob

    kind = "y_b"

    def bits(self) -> np.ndarray:
        w = codec.BitWriter()
        codec.write_blob(w, self.blob)
        return w.getvalue()


@dataclass(frozen=True)
class YTB:
    blob: CipherBlob

    kind = "y_tb"

    def bits(self) -> np.ndarray:
        w = codec.BitWriter()
        codec.write_blob(w, self.blob)
        return w.getvalue()


@dataclass(frozen=True)
class STilde:
    """Alice's forward to the arbitrator in the undeniable variant."""

    y_b: CipherBlob
    stilde: CipherBlob

    kind = "stilde"

    def bits(self) -> np.ndarray:
        w = codec.BitWriter()
        codec.write_blob(w, self.y_b)
        codec.write_blob(w, self.stilde)
        return w.getvalue()


Payload = Union[SignedMessage, YB, YTB, STilde]


@dataclass(frozen=True)
class Envelope:
    sender: PartyId
    receiver: PartyId
    sequence: int
    payload: Payload


@dataclass(frozen=True)
class Event:
    seq: int
    phase: str
    sender: str
    receiver: str
    kind: str
    payload_hex: str

    def to_line(self) -> str:
        return (
            f"seq={self.seq} phase={self.phase} sender={self.sender} "
            f"receiver={self.receiver} kind={self.kind} payload_hex={self.payload_hex or '-'}"
        )


Interceptor = Callable[[Envelope], Envelope]


class Channel:
    """Reliable ordered in-memory channel; every delivery is logged.

    ``interceptor`` sees each envelope before delivery and returns the one
    actually delivered (possibly altered).
    """

    def __init__(self, interceptor: Optional[Interceptor] = None) -> None:
        self.interceptor = interceptor
        self.events: List[Event] = []
        self.envelopes: List[Envelope] = []

    def log(self, phase: str, sender: str, receiver: str, kind: str, bits=None) -> Event:
        payload_hex = codec.to_hex(bits) if bits is not None and len(bits) else ""
        event = Event(len(self.events), phase, sender, receiver, kind, payload_hex)
        self.events.append(event)
        return event

    def send(self, phase: str, sender: PartyId, receiver: PartyId, payload: Payload) -> Envelope:
        env = Envelope(sender, receiver, len(self.events), payload)
        if self.interceptor is not None:
            env = self.interceptor(env)
        self.envelopes.append(env)
        self.log(phase, env.sender.value, env.receiver.value, env.payload.kind, env.payload.bits())
        return env

    def note(self, phase: str, party: PartyId, kind: str, bits=None) -> None:
        """Record a party-local event (measurement record) in the transcript."""
        self.log(phase, party.value, party.value, kind, bits)

    def marker(self, phase: str, kind: str = "phase", bits=None) -> None:
        self.log(phase, "-", "-", kind, bits)


@dataclass(frozen=True)
class VerificationReport:
    gamma: int
    mode: Mode
    per_qubit_fidelity: Tuple[float, ...]
    accepted: bool
    reject_reason: Optional[RejectReason] = None

    def __post_init__(self) -> None:
        if self.accepted and (
            self.gamma != 1 or any(f < 1 - ACCEPT_EPS for f in self.per_qubit_fidelity)
        ):
            raise ValueError("an accepted report needs gamma = 1 and passing fidelities")

    def to_line(self, seq: int) -> str:
        fids = ",".join(repr(f) for f in self.per_qubit_fidelity) or "-"
        reason = self.reject_reason.value if self.reject_reason else "none"
        return (
            f"seq={seq} phase=verification sender=Bob receiver=Bob kind=report "
            f"accepted={'true' if self.accepted else 'false'} gamma={self.gamma} "
            f"mode={self.mode.value} reject_reason={reason} fidelities={fids}"
        )


# -- pad budgeting ------------------------------------------------------------

def pad_budget(n: int, mode: Mode = Mode.Deferred, variant: Variant = Variant.Base) -> Tuple[int, int]:
    """Key bits (Alice's key, Bob's key) one run consumes, basis prefix included."""
    entry = RecordEntry(BasisTag.Rectilinear, 1, 0)
    sig = codec.SignaturePayload((BellOutcome.PsiPlus,) * n, (entry,) * n)
    sig_len = len(codec.encode_signature(sig))
    need_a = n + sig_len
    final_len = sig_len
    if variant is Variant.Undeniable:
        final_len = len(codec.encode_stilde(codec.STildePayload(sig, np.zeros(codec.DIGEST_BITS, np.uint8))))
        need_a += final_len
    bob_xs = (XOutcome.PlusX,) * (n if mode is Mode.PaperOrder else 0)
    yb = codec.YbPayload(
        bob_xs,
        CipherBlob(np.zeros(sig_len, np.uint8), "K_a", 0),
        (QubitSpec(1, 0),) * n,
    )
    ytb = codec.YtbPayload(
        (BellOutcome.PsiPlus,) * n,
        bob_xs,
        (XOutcome.PlusX,) * n,
        1,
        CipherBlob(np.zeros(final_len, np.uint8), "K_a", 0),
    )
    need_b = len(codec.encode_yb(yb)) + len(codec.encode_ytb(ytb))
    return need_a, need_b


# -- phases -------------------------------------------------------------------

def initial_phase(
    n: int,
    key_length: Optional[int],
    rng: np.random.Generator,
    *,
    mode: Mode = Mode.Deferred,
    variant: Variant = Variant.Base,
    channel: Optional[Channel] = None,
) -> Tuple[SecretKey, SecretKey, GhzAllocation]:
    """Create both keys and ``n`` GHZ registers.

    ``key_length=None`` sizes both keys to exactly what the run needs. A
    shorter explicit length raises :class:`PadExhausted` before anything is
    generated or sent.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    need_a, need_b = pad_budget(n, mode, variant)
    if key_length is None:
        len_a, len_b = need_a, need_b
    else:
        if key_length < max(need_a, need_b):
            raise PadExhausted(
                f"key length {key_length} too short: run needs {need_a} (K_a) and {need_b} (K_b) bits"
            )
        len_a = len_b = key_length
    K_a = generate_key(len_a, rng, "K_a")
    K_b = generate_key(len_b, rng, "K_b")
    # the first n bits of K_a select bases and are never used as pad
    K_a.reserve(n)
    allocation = GhzAllocation([Register(ghz3(), ["a", "A", "b"]) for _ in range(n)])
    if channel is not None:
        channel.marker("initial")
        count = codec.BitWriter().uint(n, 32).getvalue()
        for party in (PartyId.Alice, PartyId.Bob):
            channel.log("initial", PartyId.Arbitrator.value, party.value, "ghz_shares", count)
    return K_a, K_b, allocation


@dataclass
class SigningResult:
    signature: CipherBlob
    alice_outcomes: Tuple[BellOutcome, ...]
    record: RotatedRecord
    envelope: Envelope


def signing_phase(
    message: Sequence[QubitSpec],
    K_a: SecretKey,
    allocation: GhzAllocation,
    rng: np.random.Generator,
    channel: Optional[Channel] = None,
) -> SigningResult:
    message = tuple(message)
    n = len(message)
    if n != len(allocation):
        raise ValueError(f"message has {n} qubits, allocation {len(allocation)} registers")
    channel = channel if channel is not None else Channel()
    channel.marker("signing")

    record = transform_message(message, derive_bases(K_a, n))
    outcomes = []
    for p, reg in zip(message, allocation.registers):
        if reg.labels != ["a", "A", "b"]:
            raise ValueError("register is not a fresh GHZ triple")
        reg.state = compose(p, reg.state)
        reg.labels = ["P", "a", "A", "b"]
        bell, reg.state = bell_measure(reg.state, (0, 1), rng)
        reg.labels = ["A", "b"]
        outcomes.append(bell)
    outcomes = tuple(outcomes)
    w = codec.BitWriter()
    codec.write_bell_list(w, outcomes)
    channel.note("signing", PartyId.Alice, "bell_outcomes", w.getvalue())

    plaintext = codec.encode_signature(codec.SignaturePayload(outcomes, record))
    signature = otp_encrypt(K_a, plaintext)
    envelope = channel.send(
        "signing", PartyId.Alice, PartyId.Bob, SignedMessage(message, signature)
    )
    return SigningResult(signature, outcomes, record, envelope)


def reconstruct_paper_order(
    p: QubitSpec, bell: BellOutcome, bob: XOutcome, arb: XOutcome
) -> float:
    """Bob's step-6 figure when his share was measured before the check.

    Bob computes the conditional state of his share from the message
    description, the claimed Bell outcome and the arbitrator's outcome,
    applies the table correction and compares with ``p``. A triple that has
    zero Born probability under ``p`` fails outright (fidelity 0).
    """
    p_bell, after_bell = project(compose(p, ghz3()), (0, 1), BELL_VECTORS[bell])
    p_arb, bob_state = project(after_bell, (0,), X_VECTORS[arb])
    if bob_state is None:
        return 0.0
    p_bob, _ = project(bob_state, (0,), X_VECTORS[bob])
    if p_bell * p_arb * p_bob <= EXACT_TOL:
        return 0.0
    corrected = apply_pauli(pauli_correction(bell, arb), bob_state, 0)
    return fidelity(corrected, p.state())


def _reject(mode: Mode, reason: RejectReason, gamma: int = 0, fids=()) -> VerificationReport:
    return VerificationReport(gamma, mode, tuple(fids), False, reason)


def _bits_equal(a, b) -> bool:
    return len(a) == len(b) and bool(np.array_equal(a, b))


def _measure_all(allocation: GhzAllocation, label: str, rng) -> Tuple[XOutcome, ...]:
    return tuple(reg.measure_x(label, rng) for reg in allocation.registers)


def _xs_bits(xs) -> np.ndarray:
    w = codec.BitWriter()
    codec.write_xs(w, xs)
    return w.getvalue()


@dataclass
class ArbitratorArchive:
    """What the arbitrator keeps after verification, for later disputes."""

    y_b: Optional[CipherBlob] = None
    signature: Optional[CipherBlob] = None
    stilde: Optional[CipherBlob] = None


def _verify(
    envelope: Envelope,
    K_a: SecretKey,
    K_b: SecretKey,
    allocation: GhzAllocation,
    mode: Mode,
    rng: np.random.Generator,
    channel: Channel,
    signing: Optional[SigningResult],
    archive: ArbitratorArchive,
) -> VerificationReport:
    if not isinstance(envelope.payload, SignedMessage):
        raise TypeError("verification starts from a SignedMessage envelope")
    channel.marker("verification")
    message = envelope.payload.message
    signature = envelope.payload.signature
    undeniable = signing is not None

    # step 1: Bob
    bob_xs: Tuple[XOutcome, ...] = ()
    if mode is Mode.PaperOrder:
        bob_xs = _measure_all(allocation, "b", rng)
        channel.note("verification", PartyId.Bob, "x_outcomes", _xs_bits(bob_xs))
    y_b = otp_encrypt(K_b, codec.encode_yb(codec.YbPayload(bob_xs, signature, message)))
    stilde_blob = None
    if undeniable:
        yb_env = channel.send("verification", PartyId.Bob, PartyId.Alice, YB(y_b))
        digest = codec.digest_bits(yb_env.payload.blob)
        stilde_plain = codec.encode_stilde(
            codec.STildePayload(codec.SignaturePayload(signing.alice_outcomes, signing.record), digest)
        )
        stilde_blob = otp_encrypt(K_a, stilde_plain)
        fwd = channel.send(
            "verification", PartyId.Alice, PartyId.Arbitrator, STilde(yb_env.payload.blob, stilde_blob)
        )
        received_yb, stilde_blob = fwd.payload.y_b, fwd.payload.stilde
    else:
        received_yb = channel.send("verification", PartyId.Bob, PartyId.Arbitrator, YB(y_b)).payload.blob
    archive.y_b = received_yb
    archive.stilde = stilde_blob

    # step 2: arbitrator recovers |S>, |P>, M_b and computes gamma
    try:
        yb_payload = codec.decode_yb(otp_decrypt(K_b, received_yb))
    except (codec.DecodeError, KeyMismatch, ValueError):
        return _reject(mode, RejectReason.DecryptError)
    archive.signature = yb_payload.signature
    claimed = yb_payload.message
    alice_outcomes: Tuple[BellOutcome, ...] = ()
    gamma = 0
    try:
        expected = codec.encode_record(transform_message(claimed, derive_bases(K_a, len(claimed))))
        if undeniable:
            st = codec.decode_stilde(otp_decrypt(K_a, stilde_blob))
            sig_payload = st.signature
            digest_ok = _bits_equal(st.yb_digest, codec.digest_bits(received_yb))
        else:
            sig_payload = codec.decode_signature(otp_decrypt(K_a, yb_payload.signature))
            digest_ok = True
        alice_outcomes = sig_payload.bell_outcomes
        gamma = int(digest_ok and _bits_equal(codec.encode_record(sig_payload.record), expected))
    except (codec.DecodeError, KeyMismatch, ValueError):
        gamma = 0

    # step 3: arbitrator measures his shares and answers
    arb_xs = _measure_all(allocation, "A", rng)
    channel.note("verification", PartyId.Arbitrator, "x_outcomes", _xs_bits(arb_xs))
    final_sig = stilde_blob if undeniable else yb_payload.signature
    y_tb = otp_encrypt(
        K_b,
        codec.encode_ytb(codec.YtbPayload(alice_outcomes, yb_payload.bob_outcomes, arb_xs, gamma, final_sig)),
    )
    ytb_env = channel.send("verification", PartyId.Arbitrator, PartyId.Bob, YTB(y_tb))

    # step 4-5: Bob decrypts and screens on gamma
    try:
        ytb = codec.decode_ytb(otp_decrypt(K_b, ytb_env.payload.blob))
    except (codec.DecodeError, KeyMismatch, ValueError):
        return _reject(mode, RejectReason.DecryptError)
    if ytb.gamma != 1:
        return _reject(mode, RejectReason.GammaZero)
    n = len(message)
    if len(ytb.alice_outcomes) != n or len(ytb.arb_outcomes) != n:
        return _reject(mode, RejectReason.StateMismatch, gamma=1)

    # step 6: rebuild |P'> and compare with |P>
    fids = []
    if mode is Mode.Deferred:
        for p, reg, bell, arb in zip(message, allocation.registers, ytb.alice_outcomes, ytb.arb_outcomes):
            k = reg.index("b")
            reg.state = apply_pauli(pauli_correction(bell, arb), reg.state, k)
            fids.append(fidelity(reg.state, p.state()))
        late_xs = _measure_all(allocation, "b", rng)
        channel.note("verification", PartyId.Bob, "x_outcomes", _xs_bits(late_xs))
    else:
        if len(ytb.bob_outcomes) != n:
            return _reject(mode, RejectReason.StateMismatch, gamma=1)
        for p, bell, bob, arb in zip(message, ytb.alice_outcomes, ytb.bob_outcomes, ytb.arb_outcomes):
            fids.append(reconstruct_paper_order(p, bell, bob, arb))
    if all(f >= 1 - ACCEPT_EPS for f in fids):
        return VerificationReport(1, mode, tuple(fids), True)
    return _reject(mode, RejectReason.StateMismatch, gamma=1, fids=fids)


def verification_phase(
    envelope: Envelope,
    K_a: SecretKey,
    K_b: SecretKey,
    allocation: GhzAllocation,
    mode: Mode,
    rng: np.random.Generator,
    channel: Optional[Channel] = None,
    archive: Optional[ArbitratorArchive] = None,
) -> Tuple[VerificationReport, List[Event]]:
    channel = channel if channel is not None else Channel()
    start = len(channel.events)
    report = _verify(
        envelope, K_a, K_b, allocation, mode, rng, channel, None,
        archive if archive is not None else ArbitratorArchive(),
    )
    return report, channel.events[start:]


def undeniable_variant(
    envelope: Envelope,
    K_a: SecretKey,
    K_b: SecretKey,
    allocation: GhzAllocation,
    mode: Mode,
    rng: np.random.Generator,
    signing: SigningResult,
    channel: Optional[Channel] = None,
    archive: Optional[ArbitratorArchive] = None,
) -> Tuple[VerificationReport, List[Event]]:
    """Verification with y_b routed through Alice, who binds it into a new
    signature under her key before the arbitrator sees it."""
    channel = channel if channel is not None else Channel()
    start = len(channel.events)
    report = _verify(
        envelope, K_a, K_b, allocation, mode, rng, channel, signing,
        archive if archive is not None else ArbitratorArchive(),
    )
    return report, channel.events[start:]


# -- orchestration ------------------------------------------------------------

@dataclass(frozen=True)
class ProtocolConfig:
    n: int = 8
    seed: int = 0
    mode: Mode = Mode.Deferred
    variant: Variant = Variant.Base
    message: Optional[Tuple[QubitSpec, ...]] = None
    key_length: Optional[int] = None

    def __post_init__(self) -> None:
        if self.message is not None:
            object.__setattr__(self, "message", tuple(self.message))
            if len(self.message) != self.n:
                raise ValueError(f"message has {len(self.message)} qubits but n = {self.n}")

    def snapshot(self) -> Dict[str, object]:
        return {
            "n": self.n,
            "seed": self.seed,
            "mode": self.mode.value,
            "variant": self.variant.value,
            "message": "haar" if self.message is None else "explicit",
            "key_length": self.key_length,
        }


@dataclass
class Transcript:
    seed: int
    config: Dict[str, object]
    events: List[Event] = field(default_factory=list)
    report: Optional[VerificationReport] = None
    error: Optional[str] = None

    def lines(self) -> List[str]:
        out = [e.to_line() for e in self.events]
        seq = len(self.events)
        if self.report is not None:
            out.append(self.report.to_line(seq))
        else:
            out.append(f"seq={seq} phase=abort sender=- receiver=- kind=error error={self.error}")
        return out

    def to_text(self) -> str:
        return "\n".join(self.lines()) + "\n"

    @property
    def envelope_events(self) -> List[Event]:
        return [e for e in self.events if e.kind in ("signed_message", "y_b", "y_tb", "stilde")]


def _log_config(channel: Channel, config: ProtocolConfig) -> None:
    raw = json.dumps(config.snapshot(), sort_keys=True).encode()
    channel.marker("setup", "config", np.unpackbits(np.frombuffer(raw, dtype=np.uint8)))


class Session:
    """One protocol run: keys, registers, channel and party-private state."""

    def __init__(self, config: ProtocolConfig, interceptor: Optional[Interceptor] = None) -> None:
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.channel = Channel(interceptor)
        _log_config(self.channel, config)
        self.message = config.message if config.message is not None else tuple(haar_message(config.n, self.rng))
        self.K_a, self.K_b, self.allocation = initial_phase(
            config.n, config.key_length, self.rng,
            mode=config.mode, variant=config.variant, channel=self.channel,
        )
        self.signing: Optional[SigningResult] = None
        self.report: Optional[VerificationReport] = None
        self.archive = ArbitratorArchive()

    def sign(self) -> SigningResult:
        self.signing = signing_phase(self.message, self.K_a, self.allocation, self.rng, self.channel)
        return self.signing

    def verify(self) -> VerificationReport:
        if self.signing is None:
            raise RuntimeError("sign() first")
        args = (self.signing.envelope, self.K_a, self.K_b, self.allocation, self.config.mode, self.rng)
        if self.config.variant is Variant.Undeniable:
            self.report, _ = undeniable_variant(*args, self.signing, self.channel, self.archive)
        else:
            self.report, _ = verification_phase(*args, self.channel, self.archive)
        return self.report

    def run(self) -> VerificationReport:
        self.sign()
        return self.verify()

    def transcript(self) -> Transcript:
        return Transcript(self.config.seed, self.config.snapshot(), list(self.channel.events), self.report)


def run_protocol(config: ProtocolConfig, interceptor: Optional[Interceptor] = None) -> Transcript:
    """Initial, signing and verification phases in order.

    Phase errors (short keys, malformed input) end the run with an error
    line instead of a report.
    """
    try:
        session = Session(config, interceptor)
    except (PadExhausted, ValueError) as exc:
        channel = Channel()
        _log_config(channel, config)
        return Transcript(config.seed, config.snapshot(), channel.events, None, type(exc).__name__)
    try:
        session.run()
    except PadExhausted as exc:
        t = session.transcript()
        t.error = type(exc).__name__
        return t
    return session.transcript()
