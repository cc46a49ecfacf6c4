import math

import numpy as np
import pytest

from phqgt.models import HamiltonianFamily, ModelI, ModelII

ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    verdict = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES.append(f"[{verdict}] criterion {number}: {title} ({detail})")


@pytest.fixture
def acceptance_record():
    return record_criterion


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def fig1_family():
    return HamiltonianFamily(ModelI.from_cycles(10, 15, 0), q=3.0)


@pytest.fixture(scope="session")
def fig3_family():
    return HamiltonianFamily(ModelII.from_cycles(15), q=3.0)


@pytest.fixture(scope="session")
def isotropic_family():
    """Hermitian spin-1/2 in a unit radial field."""
    return HamiltonianFamily(ModelI(2.0, 2.0, 0.0), q=1.0)


def random_complex(rng, shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def effective_hermitian_qgt(family, lam):
    """Ground-band QGT through the similar Hermitian model.

    ``eta^{1/2} H eta^{-1/2}`` equals ``d dz I`` plus an ordinary Pauli
    Hamiltonian with Bloch vector ``(sqrt(c) dx, sqrt(c) dy, c dz)``; the
    identity part drops out, so a plain ``eigh`` sum over states suffices.
    """
    q = family.q
    c = (1 + q * q) / (2 * q)
    scale = np.array([math.sqrt(c), math.sqrt(c), c])
    pauli = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)

    def herm(vec):
        return np.einsum("i,ijk->jk", scale * np.asarray(vec), pauli)

    H = herm(family.bloch(lam))
    E, V = np.linalg.eigh(H)
    dH = [herm(family.model.bloch_derivative(lam, mu)) for mu in (0, 1)]
    Q = np.zeros((2, 2), dtype=complex)
    for mu in range(2):
        for nu in range(2):
            Q[mu, nu] = (np.vdot(V[:, 0], dH[mu] @ V[:, 1]) * np.vdot(V[:, 1], dH[nu] @ V[:, 0])) / (E[0] - E[1]) ** 2
    return Q
