"""Reference values of the left-right quantum geometric tensor.

``qgt_spectral`` is the production path: it sums over other bands using
force-operator matrix elements, so no eigenvector is ever differentiated
and the result is gauge independent. ``qgt_fd`` differentiates
gauge-fixed eigenvectors numerically and exists only as an oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IndexMismatch, StepTooLarge
from .linalg import BiorthogonalEigensystem, eig_biorthogonal, gauge_fix


@dataclass(frozen=True)
class QGTComponent:
    value: complex
    band: int
    mu: int
    nu: int
    lam: tuple


@dataclass(frozen=True)
class MetricCurvaturePair:
    g: float
    F: float


@dataclass(frozen=True)
class ChernResult:
    C: float
    grid_points: int
    delta2_over_delta1: float


def qgt_from_eigensystem(system: BiorthogonalEigensystem, dH_mu, dH_nu, band: int = 0) -> complex:
    """Sum over m != n of <L_n|dH_mu|R_m><L_m|dH_nu|R_n> / (E_n - E_m)^2."""
    L, R, E = system.left, system.right, system.energies
    n = band
    total = 0j
    for m in range(system.dim):
        if m == n:
            continue
        total += (L[:, n].conj() @ dH_mu @ R[:, m]) * (L[:, m].conj() @ dH_nu @ R[:, n]) / (E[n] - E[m]) ** 2
    return complex(total)


def qgt_spectral(family, lam, mu, nu, band: int = 0) -> QGTComponent:
    mu, nu = family.direction(mu), family.direction(nu)
    system = eig_biorthogonal(family.hamiltonian(lam))
    value = qgt_from_eigensystem(system, family.dhamiltonian(lam, mu), family.dhamiltonian(lam, nu), band)
    return QGTComponent(value, band, mu, nu, tuple(float(x) for x in lam))


def qgt_matrix(family, lam, band: int = 0) -> np.ndarray:
    """Full 2x2 tensor ``Q[mu, nu]`` from one eigendecomposition."""
    system = eig_biorthogonal(family.hamiltonian(lam))
    dH = [family.dhamiltonian(lam, 0), family.dhamiltonian(lam, 1)]
    return np.array([[qgt_from_eigensystem(system, dH[i], dH[j], band) for j in range(2)] for i in range(2)])


def _shifted(lam, mu, h):
    out = [float(lam[0]), float(lam[1])]
    out[mu] += h
    return out


def _fd_once(family, lam, mu, nu, band, h, pivots):
    def pair(point):
        s = eig_biorthogonal(family.hamiltonian(point))
        R, L = gauge_fix(s.right[:, band], partners=s.left[:, band], pivots=pivots)
        return R, L

    R0, L0 = pair(lam)
    Rp, _ = pair(_shifted(lam, nu, h))
    Rm, _ = pair(_shifted(lam, nu, -h))
    _, Lp = pair(_shifted(lam, mu, h))
    _, Lm = pair(_shifted(lam, mu, -h))
    dR = (Rp - Rm) / (2 * h)
    dL = (Lp - Lm) / (2 * h)
    return np.vdot(dL, dR) - np.vdot(dL, R0) * np.vdot(L0, dR)


def qgt_fd(family, lam, mu, nu, band: int = 0, h: float = 1e-4, extrapolate: bool = False) -> QGTComponent:
    """Finite-difference oracle from the eigenvector-derivative definition.

    Eigenvectors at the shifted points are gauge fixed on the component
    chosen at ``lam`` so the phase convention is smooth. With
    ``extrapolate`` the steps ``h`` and ``h/2`` are Richardson-combined.
    """
    mu, nu = family.direction(mu), family.direction(nu)
    center = eig_biorthogonal(family.hamiltonian(lam))
    pivot = int(np.argmax(np.abs(center.right[:, band])))
    perturbation = h * max(np.linalg.norm(family.dhamiltonian(lam, mu), 2), np.linalg.norm(family.dhamiltonian(lam, nu), 2))
    if perturbation > 0.1 * center.gap(band):
        raise StepTooLarge(f"step {h} perturbs by {perturbation:.3e}, gap is {center.gap(band):.3e}")
    value = _fd_once(family, lam, mu, nu, band, h, [pivot])
    if extrapolate:
        half = _fd_once(family, lam, mu, nu, band, h / 2, [pivot])
        value = (4 * half - value) / 3
    return QGTComponent(complex(value), band, mu, nu, tuple(float(x) for x in lam))


def metric_curvature(Q_munu: QGTComponent, Q_numu: QGTComponent) -> MetricCurvaturePair:
    """Quantum metric and Berry curvature from a transposed pair of components.

    ``g = (Q_munu + Q_numu) / 2`` and ``F = i (Q_munu - Q_numu)``; for a
    Hermitian tensor these are ``Re Q_munu`` and ``-2 Im Q_munu``.
    """
    if (Q_munu.mu, Q_munu.nu) != (Q_numu.nu, Q_numu.mu) or Q_munu.band != Q_numu.band or not np.allclose(Q_munu.lam, Q_numu.lam):
        raise IndexMismatch("components must share band and point and have swapped indices")
    g = 0.5 * (Q_munu.value + Q_numu.value)
    F = 1j * (Q_munu.value - Q_numu.value)
    return MetricCurvaturePair(float(g.real), float(F.real))


def berry_curvature(family, lam, mu=0, nu=1, band: int = 0) -> float:
    """``F_munu = 2 Im Q_numu`` from the spectral path."""
    return 2.0 * qgt_spectral(family, lam, nu, mu, band).value.imag


def trapezoid(values, grid) -> float:
    return float(np.trapezoid(np.asarray(values, dtype=float), np.asarray(grid, dtype=float)))


def chern_number(family, phi_fixed: float = 0.0, n_theta: int = 21, band: int = 0) -> ChernResult:
    """Chern number of a (theta, phi) family by trapezoid integration of F_theta_phi over [0, pi]."""
    thetas = np.linspace(0.0, np.pi, n_theta)
    F = [berry_curvature(family, (t, phi_fixed), 0, 1, band) for t in thetas]
    model = family.model
    ratio = getattr(model, "delta2", 0.0) / model.delta1 if hasattr(model, "delta1") else float("nan")
    return ChernResult(trapezoid(F, thetas), n_theta, float(ratio))


def curvature_phi_spread(family, theta: float, phis, band: int = 0) -> float:
    """Max minus min of F_theta_phi over ``phis`` at fixed ``theta``."""
    F = [berry_curvature(family, (theta, p), 0, 1, band) for p in phis]
    return float(np.max(F) - np.min(F))
