"""
Reference Systems

Small systems with known answers, used by the repro command, the HTTP
catalogue and the test-suite:

- counterexample: discrete 4-state system with a pathological period of 4,
  on which the two necessary sampled conditions fail in opposite directions
- example: discrete 4-state, 3-output system whose functional output is
  recovered from a 2-dimensional observable block through a structured-Q
  certificate
- oscillator: continuous harmonic oscillator for the sample-count bound
"""

from typing import Any, Dict, List, Tuple

import numpy as np

from functional_observability import StructuredQ
from system_model import LtiSystem, SamplingSequence, TimeDomain, system_to_dict


def counterexample_system() -> LtiSystem:
    A = np.array([
        [1.0, 1.0, 0.0, 0.0],
        [-1.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 2.0, 2.0],
        [0.0, 0.0, -2.0, 2.0],
    ])
    C = np.array([[1.0, 1.0, 1.0, 1.0]])
    F = np.array([[1.0, 1.0, 0.0, 0.0]])
    return LtiSystem(A=A, B=np.zeros((4, 0)), C=C, D=np.zeros((1, 0)), F=F, domain=TimeDomain.DISCRETE)


COUNTEREXAMPLE_SCHEDULES: Dict[str, Tuple[int, ...]] = {
    "irregular": (0, 4, 8, 13),
    "pathological": (2, 6, 10, 14),
}

# expected ranks of O_s, (O_s; F), (O_s; O_s(A,F)) and (O_s; O(A,F))
COUNTEREXAMPLE_RANKS: Dict[str, Dict[str, int]] = {
    "irregular": {"O_s": 3, "O_s|F": 3, "O_s|O_s(A,F)": 4, "O_s|O(A,F)": 4},
    "pathological": {"O_s": 2, "O_s|F": 3, "O_s|O_s(A,F)": 2, "O_s|O(A,F)": 3},
}

COUNTEREXAMPLE_PERIOD = 4


def counterexample_schedule(name: str) -> SamplingSequence:
    return SamplingSequence(COUNTEREXAMPLE_SCHEDULES[name], TimeDomain.DISCRETE)


def example_system() -> LtiSystem:
    A = np.array([
        [1.0, 0.0, 0.0, 0.0],
        [1.0, -1.0, 0.0, 0.0],
        [-2.0, 3.2, 0.6, 2.4],
        [0.0, -0.3, -0.15, 0.6],
    ])
    C = np.array([
        [1.0, 0.0, 0.0, 0.0],
        [1.5, -4.0, -1.0, 0.0],
        [2.0, -6.0, -1.0, -4.0],
    ])
    F = np.array([[0.0, -2.0, -1.0, 1.0]])
    return LtiSystem(A=A, B=np.zeros((4, 0)), C=C, D=np.zeros((3, 0)), F=F, domain=TimeDomain.DISCRETE)


def example_certificate() -> Tuple[np.ndarray, StructuredQ]:
    """Published alpha and diagonal Q for the example system."""
    alpha = np.array([[1.0, -2.0, 1.0]])
    Q = StructuredQ.diagonal([1.0, 1.0, -0.625 + 0.375j, -0.625 - 0.375j])
    return alpha, Q


EXAMPLE_ALPHA_C_J_Q = np.array([[0.0, 0.0, 1.0 - 4.0j, 1.0 + 4.0j]])


def example_schedule(horizon: int = 40) -> SamplingSequence:
    """
    Fixed irregular schedule with spacings cycling 1, 3, 3.

    No spacing is even, so the eigenvalues 1 and -1 never alias, and none
    is a multiple of 4, so 0.6 +- 0.6i never alias either. Every window of
    two samples certifies the 2-dimensional block of (A, F); every window
    of four contains a unit spacing and certifies the full pair, whose
    observability index is 2.
    """
    times: List[int] = [0]
    steps = (1, 3, 3)
    i = 0
    while times[-1] + steps[i % 3] <= horizon:
        times.append(times[-1] + steps[i % 3])
        i += 1
    return SamplingSequence(tuple(times), TimeDomain.DISCRETE)


def oscillator_system() -> LtiSystem:
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    C = np.array([[1.0, 0.0]])
    F = np.array([[1.0, 0.0]])
    return LtiSystem(A=A, B=np.zeros((2, 0)), C=C, D=np.zeros((1, 0)), F=F, domain=TimeDomain.CONTINUOUS)


REFERENCE_SYSTEMS = {
    "counterexample": counterexample_system,
    "example": example_system,
    "oscillator": oscillator_system,
}


def catalog() -> Dict[str, Any]:
    """System documents of every reference system, keyed by name."""
    return {name: system_to_dict(factory()) for name, factory in REFERENCE_SYSTEMS.items()}
