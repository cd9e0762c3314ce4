"""Small state-vector engine for the signature protocol (at most 4 qubits).

Qubit 0 is the most significant bit of a basis label. In the protocol the
four-qubit register is ordered (message, Alice's share, arbitrator's share,
Bob's share).

Bell outcomes use the labeling under which the four-particle expansion of
``message (x) GHZ`` reads

    PsiPlus  -> a|00> + b|11>     PsiMinus -> a|00> - b|11>
    PhiPlus  -> b|00> + a|11>     PhiMinus -> b|00> - a|11>

on the remaining (arbitrator, Bob) pair, i.e. PsiPlus/PsiMinus are
(|00> +/- |11>)/sqrt2 and PhiPlus/PhiMinus are (|01> +/- |10>)/sqrt2.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

MAX_QUBITS = 4
NORM_TOL = 1e-9
EXACT_TOL = 1e-12

SQRT1_2 = 1.0 / math.sqrt(2.0)


class BellOutcome(enum.Enum):
    PsiPlus = 0
    PsiMinus = 1
    PhiPlus = 2
    PhiMinus = 3


class XOutcome(enum.Enum):
    PlusX = 0
    MinusX = 1


class PauliOp(enum.Enum):
    Identity = "I"
    SigmaX = "X"
    SigmaZ = "Z"
    SigmaXZ = "XZ"  # sigma_x . sigma_z, z applied first


BELL_VECTORS: Dict[BellOutcome, np.ndarray] = {
    BellOutcome.PsiPlus: np.array([1, 0, 0, 1], dtype=complex) * SQRT1_2,
    BellOutcome.PsiMinus: np.array([1, 0, 0, -1], dtype=complex) * SQRT1_2,
    BellOutcome.PhiPlus: np.array([0, 1, 1, 0], dtype=complex) * SQRT1_2,
    BellOutcome.PhiMinus: np.array([0, 1, -1, 0], dtype=complex) * SQRT1_2,
}

X_VECTORS: Dict[XOutcome, np.ndarray] = {
    XOutcome.PlusX: np.array([1, 1], dtype=complex) * SQRT1_2,
    XOutcome.MinusX: np.array([1, -1], dtype=complex) * SQRT1_2,
}

_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)

PAULI_MATRICES: Dict[PauliOp, np.ndarray] = {
    PauliOp.Identity: np.eye(2, dtype=complex),
    PauliOp.SigmaX: _SX,
    PauliOp.SigmaZ: _SZ,
    PauliOp.SigmaXZ: _SX @ _SZ,
}

# Bob's correction given (Alice's Bell outcome, arbitrator's x outcome).
CORRECTION_TABLE: Dict[Tuple[BellOutcome, XOutcome], PauliOp] = {
    (BellOutcome.PsiPlus, XOutcome.PlusX): PauliOp.Identity,
    (BellOutcome.PsiPlus, XOutcome.MinusX): PauliOp.SigmaZ,
    (BellOutcome.PsiMinus, XOutcome.PlusX): PauliOp.SigmaZ,
    (BellOutcome.PsiMinus, XOutcome.MinusX): PauliOp.Identity,
    (BellOutcome.PhiPlus, XOutcome.PlusX): PauliOp.SigmaX,
    (BellOutcome.PhiPlus, XOutcome.MinusX): PauliOp.SigmaXZ,
    (BellOutcome.PhiMinus, XOutcome.PlusX): PauliOp.SigmaXZ,
    (BellOutcome.PhiMinus, XOutcome.MinusX): PauliOp.SigmaX,
}

JointDistribution = Dict[Tuple[BellOutcome, XOutcome, XOutcome], float]


class MeasurementError(RuntimeError):
    """A measurement selected a branch with zero probability."""


def _check_amplitude(z: complex, name: str) -> complex:
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"{name} must be finite, got {z!r}")
    return z


def norm2(a: complex, b: complex) -> float:
    """|a|^2 + |b|^2, inf instead of OverflowError for huge components."""
    try:
        return abs(a) ** 2 + abs(b) ** 2
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class QubitSpec:
    """Classical description alpha|0> + beta|1> of one message qubit."""

    alpha: complex
    beta: complex

    def __post_init__(self) -> None:
        a = _check_amplitude(self.alpha, "alpha")
        b = _check_amplitude(self.beta, "beta")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)
        norm = norm2(a, b)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"qubit not normalized: |alpha|^2+|beta|^2 = {norm!r}")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.alpha, self.beta], dtype=complex)

    def state(self) -> "PureState":
        return PureState(self.vector)

    def bloch(self) -> Tuple[float, float, float]:
        ab = self.alpha.conjugate() * self.beta
        return (2 * ab.real, 2 * ab.imag, abs(self.alpha) ** 2 - abs(self.beta) ** 2)


class PureState:
    """Immutable normalized amplitude vector over ``qubit_count`` qubits.

    A zero-qubit state (a single unit amplitude) is what remains after every
    qubit of a register has been measured.
    """

    __slots__ = ("_amps",)

    def __init__(self, amplitudes) -> None:
        amps = np.array(amplitudes, dtype=complex).reshape(-1)
        size = amps.size
        if size == 0 or size & (size - 1):
            raise ValueError(f"amplitude count must be a power of two, got {size}")
        if size > 2**MAX_QUBITS:
            raise ValueError(f"at most {MAX_QUBITS} qubits supported")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized: norm^2 = {norm!r}")
        amps.setflags(write=False)
        self._amps = amps

    @classmethod
    def _trusted(cls, amps: np.ndarray) -> "PureState":
        # for results normalized by construction; skips validation
        obj = cls.__new__(cls)
        amps.setflags(write=False)
        obj._amps = amps
        return obj

    @property
    def amplitudes(self) -> np.ndarray:
        return self._amps

    @property
    def qubit_count(self) -> int:
        return self._amps.size.bit_length() - 1

    def __repr__(self) -> str:
        return f"PureState({self.qubit_count} qubits, {np.round(self._amps, 6).tolist()})"


def basis_state(label: str) -> PureState:
    """``basis_state("01")`` is |01>."""
    amps = np.zeros(2 ** len(label), dtype=complex)
    amps[int(label, 2)] = 1.0
    return PureState(amps)


def ghz3() -> PureState:
    amps = np.zeros(8, dtype=complex)
    amps[0] = amps[7] = SQRT1_2
    return PureState(amps)


def compose(message: QubitSpec, ghz: PureState) -> PureState:
    """Tensor the message qubit in front of a three-qubit GHZ register."""
    if ghz.qubit_count != 3:
        raise ValueError(f"expected a 3-qubit GHZ register, got {ghz.qubit_count} qubits")
    return PureState._trusted(np.outer(message.vector, ghz.amplitudes).reshape(-1))


def _check_index(state: PureState, qubit: int) -> None:
    if not 0 <= qubit < state.qubit_count:
        raise IndexError(f"qubit {qubit} out of range for {state.qubit_count}-qubit state")


def _split(state: PureState, qubits: Tuple[int, ...]) -> np.ndarray:
    """Reshape to (2**len(qubits), 2**rest) with ``qubits`` as the row index."""
    k = state.qubit_count
    rest = [q for q in range(k) if q not in qubits]
    t = state.amplitudes.reshape((2,) * k)
    return np.transpose(t, list(qubits) + rest).reshape(2 ** len(qubits), -1)


def _sample(rng: np.random.Generator, branches: np.ndarray):
    probs = (branches.real**2 + branches.imag**2).sum(axis=1).tolist()
    u = rng.random() * sum(probs)
    idx = len(probs) - 1
    acc = 0.0
    for k, pk in enumerate(probs):
        acc += pk
        if u < acc:
            idx = k
            break
    while probs[idx] <= 0.0:
        # u landed on the upper edge; fall back to the last live branch
        idx -= 1
        if idx < 0:
            raise MeasurementError("selected a zero-probability branch")
    residual = branches[idx] / math.sqrt(probs[idx])
    return idx, PureState._trusted(residual)


_BELL_ORDER = tuple(BellOutcome)
_BELL_ROWS = np.array([BELL_VECTORS[b] for b in _BELL_ORDER]).conj()
_X_ORDER = tuple(XOutcome)
_X_ROWS = np.array([X_VECTORS[x] for x in _X_ORDER]).conj()


def bell_measure(
    state: PureState, qubit_pair: Tuple[int, int], rng: np.random.Generator
) -> Tuple[BellOutcome, PureState]:
    """Projective Bell measurement on ``qubit_pair``; the pair is removed."""
    i, j = qubit_pair
    if state.qubit_count < 2:
        raise ValueError("Bell measurement needs at least 2 qubits")
    _check_index(state, i)
    _check_index(state, j)
    if i == j:
        raise ValueError("Bell measurement needs two distinct qubits")
    branches = _BELL_ROWS @ _split(state, (i, j))
    idx, residual = _sample(rng, branches)
    return _BELL_ORDER[idx], residual


def x_measure(
    state: PureState, qubit: int, rng: np.random.Generator
) -> Tuple[XOutcome, PureState]:
    """Measure one qubit in the {|+x>, |-x>} basis; the qubit is removed."""
    _check_index(state, qubit)
    branches = _X_ROWS @ _split(state, (qubit,))
    idx, residual = _sample(rng, branches)
    return _X_ORDER[idx], residual


def pauli_correction(bell: BellOutcome, arb: XOutcome) -> PauliOp:
    return CORRECTION_TABLE[(bell, arb)]


def apply_pauli(op: PauliOp, state: PureState, qubit: int) -> PureState:
    _check_index(state, qubit)
    k = state.qubit_count
    t = state.amplitudes.reshape((2,) * k)
    out = np.moveaxis(np.tensordot(PAULI_MATRICES[op], t, axes=([1], [qubit])), 0, qubit)
    return PureState._trusted(np.ascontiguousarray(out).reshape(-1))


def bob_marginal(bell: BellOutcome, p: QubitSpec) -> np.ndarray:
    """Bob's reduced density matrix after Alice's Bell outcome ``bell``."""
    a2, b2 = abs(p.alpha) ** 2, abs(p.beta) ** 2
    if bell in (BellOutcome.PsiPlus, BellOutcome.PsiMinus):
        return np.diag([a2, b2]).astype(complex)
    return np.diag([b2, a2]).astype(complex)


def partial_trace(state: PureState, keep: Tuple[int, ...]) -> np.ndarray:
    """Reduced density matrix on ``keep`` (in the given order)."""
    for q in keep:
        _check_index(state, q)
    m = _split(state, tuple(keep))
    return m @ m.conj().T


def fidelity(a: PureState, b: PureState) -> float:
    if a.qubit_count != b.qubit_count:
        raise ValueError(
            f"qubit count mismatch: {a.qubit_count} vs {b.qubit_count}"
        )
    f = abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2
    return float(min(1.0, f))


def enumerate_joint_distribution(p: QubitSpec) -> JointDistribution:
    """Exact Born probabilities of (Alice Bell, Bob x, arbitrator x).

    Expands every branch against full 16-dimensional product projectors, so it
    shares no code with the sampling path.
    """
    full = np.kron(p.vector, ghz3().amplitudes)
    out: JointDistribution = {}
    for bell, bv in BELL_VECTORS.items():
        for xb, bobv in X_VECTORS.items():
            for xa, arbv in X_VECTORS.items():
                # register order: message, a, A, b
                proj = np.kron(bv, np.kron(arbv, bobv))
                out[(bell, xb, xa)] = float(abs(np.vdot(proj, full)) ** 2)
    return out


def haar_qubit(rng: np.random.Generator) -> QubitSpec:
    while True:
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        n = np.linalg.norm(v)
        if n > 1e-12:
            break
    v = v / n
    return QubitSpec(complex(v[0]), complex(v[1]))


def is_nondegenerate(p: QubitSpec, margin: float = 1e-3) -> bool:
    """True when every wrong Pauli correction visibly lowers the fidelity.

    For a non-identity Pauli P, |<p|P|p>|^2 is the squared Bloch component
    along that axis, so requiring all components below ``1 - margin`` keeps
    any wrong correction at fidelity <= 1 - margin.
    """
    return max(c * c for c in p.bloch()) < 1.0 - margin



def haar_message(n: int, rng: np.random.Generator, nondegenerate: bool = False) -> list:
    out = []
    while len(out) < n:
        p = haar_qubit(rng)
        if not nondegenerate or is_nondegenerate(p):
            out.append(p)
    return out


def project(state: PureState, qubits: Tuple[int, ...], vector: np.ndarray):
    """Deterministic branch: (probability, normalized residual or None)."""
    for q in qubits:
        _check_index(state, q)
    residual = np.asarray(vector, dtype=complex).conj() @ _split(state, tuple(qubits))
    prob = float(np.vdot(residual, residual).real)
    if prob <= 1e-24:
        return 0.0, None
    return prob, PureState(residual / math.sqrt(prob))


def sample_measurement_chain(
    p: QubitSpec, rng: np.random.Generator
) -> Tuple[BellOutcome, XOutcome, XOutcome]:
    """One sampled (Alice Bell, Bob x, arbitrator x) triple for message ``p``.

    Same order as PaperOrder verification: Alice's Bell measurement on
    (message, a), then Bob's x measurement, then the arbitrator's.
    """
    state = compose(p, ghz3())
    bell, state = bell_measure(state, (0, 1), rng)  # leaves (A, b)
    bob, state = x_measure(state, 1, rng)
    arb, _ = x_measure(state, 0, rng)
    return bell, bob, arb


def total_variation(p: Dict, q: Dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)
