"""Statevector simulation of the controlled-SWAP circuit for generalized expectation values.

Qubit order is ancilla first (most significant), then register 1, then
register 2. For unit inputs the circuit prepares

    (|0>|psi1>|psi2> + |1>|psi2>|psi1>) / sqrt(2)

and the ancilla Pauli readouts give ``Re``/``Im`` of
``<psi1|O|psi2><psi2|psi1>``; dividing by the ``sigma_x``, ``O = I``
readout ``|<psi1|psi2>|^2`` yields the generalized expectation value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NearOrthogonal
from .measurement import NEAR_ORTHOGONAL_TOL

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (2 ** self.num_qubits,):
            raise DimensionMismatch(f"{self.num_qubits} qubits need {2 ** self.num_qubits} amplitudes")
        if abs(np.linalg.norm(self.amplitudes) - 1) > 1e-12:
            raise ValueError("state vector is not normalized")


@dataclass(frozen=True)
class HermitianObservable:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch("observable must be square")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-12 * max(1.0, np.abs(m).max()):
            raise ValueError("observable is not Hermitian")
        object.__setattr__(self, "matrix", m)


def hermitian_split(A) -> tuple[HermitianObservable, HermitianObservable]:
    """``A = A_plus + i A_minus`` with both parts Hermitian."""
    A = np.asarray(A, dtype=complex)
    Ad = A.conj().T
    return HermitianObservable((A + Ad) / 2), HermitianObservable((A - Ad) / 2j)


def _num_register_qubits(dim: int) -> int:
    n = int(round(np.log2(dim)))
    if 2 ** n != dim:
        raise DimensionMismatch(f"register dimension {dim} is not a power of two")
    return n


def controlled_swap(n: int) -> np.ndarray:
    """Permutation matrix of a CSWAP between two n-qubit registers, ancilla as control."""
    d = 2 ** n
    size = 2 * d * d
    perm = np.arange(size)
    for i in range(d):
        for j in range(d):
            perm[d * d + i * d + j] = d * d + j * d + i
    U = np.zeros((size, size), dtype=complex)
    U[perm, np.arange(size)] = 1.0
    return U


def build_output_state(psi1, psi2) -> StateVector:
    psi1 = np.asarray(psi1, dtype=complex)
    psi2 = np.asarray(psi2, dtype=complex)
    if psi1.shape != psi2.shape or psi1.ndim != 1:
        raise DimensionMismatch(f"register shapes differ: {psi1.shape} vs {psi2.shape}")
    n = _num_register_qubits(len(psi1))
    d = 2 ** n
    state = np.kron(np.array([1, 0], dtype=complex), np.kron(psi1, psi2))
    state = np.kron(HADAMARD, np.eye(d * d)) @ state
    state = controlled_swap(n) @ state
    return StateVector(2 * n + 1, state)


def _ancilla_operator(state: StateVector, O, pauli: str) -> np.ndarray:
    O = O.matrix if isinstance(O, HermitianObservable) else np.asarray(O, dtype=complex)
    n = (state.num_qubits - 1) // 2
    if O.shape != (2 ** n, 2 ** n):
        raise DimensionMismatch(f"observable shape {O.shape} does not fit {n}-qubit registers")
    return np.kron(PAULI[pauli], np.kron(O, np.eye(2 ** n)))


def readout(state: StateVector, O, pauli: str) -> float:
    """``<Psi| sigma_pauli (x) O (x) I |Psi>``."""
    op = _ancilla_operator(state, O, pauli)
    return float(np.vdot(state.amplitudes, op @ state.amplitudes).real)


def sampled_readout(state: StateVector, O, pauli: str, shots: int, rng: np.random.Generator) -> float:
    """Shot-sampled estimate of :func:`readout` from projective measurement in the observable eigenbasis."""
    op = _ancilla_operator(state, O, pauli)
    evals, evecs = np.linalg.eigh(op)
    probs = np.abs(evecs.conj().T @ state.amplitudes) ** 2
    counts = rng.multinomial(shots, probs / probs.sum())
    return float(counts @ evals / shots)


def gev_via_circuit(psi1, psi2, A, shots: int | None = None, rng: np.random.Generator | None = None) -> complex:
    """Generalized expectation value assembled from circuit readouts.

    Each Hermitian part ``O`` of ``A`` contributes
    ``(readout_x(O) + i readout_y(O)) / readout_x(I)``. With ``shots`` set,
    readouts are sampled instead of exact.
    """
    psi1 = np.asarray(psi1, dtype=complex)
    psi2 = np.asarray(psi2, dtype=complex)
    psi1 = psi1 / np.linalg.norm(psi1)
    psi2 = psi2 / np.linalg.norm(psi2)
    state = build_output_state(psi1, psi2)
    if shots is None:
        measure = readout
    else:
        rng = rng or np.random.default_rng()

        def measure(s, O, p):
            return sampled_readout(s, O, p, shots, rng)

    identity = np.eye(len(psi1))
    den = measure(state, identity, "x")
    if den < NEAR_ORTHOGONAL_TOL ** 2:
        raise NearOrthogonal(f"|<psi1|psi2>|^2 = {den:.3e} is too small")
    plus, minus = hermitian_split(A)
    parts = [(measure(state, O, "x") + 1j * measure(state, O, "y")) / den for O in (plus, minus)]
    return complex(parts[0] + 1j * parts[1])
