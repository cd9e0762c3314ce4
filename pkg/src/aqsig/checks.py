"""Self-contained consistency checks behind ``aqsig selftest``.

Each check returns a list of failure descriptions; an empty list is a pass.
"""

from __future__ import annotations

from collections import Counter
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .quantum import (
    BELL_VECTORS,
    CORRECTION_TABLE,
    EXACT_TOL,
    NORM_TOL,
    X_VECTORS,
    BellOutcome,
    PauliOp,
    XOutcome,
    apply_pauli,
    bob_marginal,
    compose,
    enumerate_joint_distribution,
    fidelity,
    ghz3,
    haar_message,
    partial_trace,
    project,
    sample_measurement_chain,
    total_variation,
)


def check_correction_table(
    table: Optional[Mapping[Tuple[BellOutcome, XOutcome], PauliOp]] = None,
    specs: int = 20,
    seed: int = 17,
) -> List[str]:
    """Every (Bell, arbitrator x) branch, corrected per ``table``, must give
    back the message qubit."""
    table = CORRECTION_TABLE if table is None else table
    rng = np.random.default_rng(seed)
    failures = set()
    for p in haar_message(specs, rng, nondegenerate=True):
        full = compose(p, ghz3())
        for bell, bv in BELL_VECTORS.items():
            _, after = project(full, (0, 1), bv)
            for arb, av in X_VECTORS.items():
                _, bob = project(after, (0,), av)
                f = fidelity(apply_pauli(table[(bell, arb)], bob, 0), p.state())
                if f < 1 - NORM_TOL:
                    failures.add(f"correction ({bell.name}, {arb.name}) -> {table[(bell, arb)].name}")
    return sorted(failures)


def check_bob_marginals(specs: int = 20, seed: int = 23) -> List[str]:
    rng = np.random.default_rng(seed)
    failures = []
    for p in haar_message(specs, rng):
        full = compose(p, ghz3())
        for bell, bv in BELL_VECTORS.items():
            _, after = project(full, (0, 1), bv)
            brute = partial_trace(after, (1,))
            err = float(np.max(np.abs(brute - bob_marginal(bell, p))))
            if err > EXACT_TOL:
                failures.append(f"marginal {bell.name}: max deviation {err:.3g}")
    return failures


def empirical_joint(p, samples: int, rng: np.random.Generator) -> Dict:
    counts = Counter(sample_measurement_chain(p, rng) for _ in range(samples))
    return {k: v / samples for k, v in counts.items()}


def check_sampler(specs: int = 2, samples: int = 20_000, threshold: float = 0.02, seed: int = 29) -> List[str]:
    rng = np.random.default_rng(seed)
    failures = []
    for p in haar_message(specs, rng):
        tv = total_variation(empirical_joint(p, samples, rng), enumerate_joint_distribution(p))
        if tv >= threshold:
            failures.append(f"sampler vs oracle: total variation {tv:.4f} >= {threshold}")
    return failures


def selftest(table=None) -> Dict[str, List[str]]:
    return {
        "correction_table": check_correction_table(table),
        "bob_marginals": check_bob_marginals(),
        "sampler_vs_oracle": check_sampler(),
    }
