"""Small dense complex linear algebra and biorthogonal eigendecomposition.

Right eigenvectors are stored unit-norm; left eigenvectors absorb the
biorthogonal normalization so that ``<L_n|R_n> = 1``. Both are stored as
columns, ``right[:, n]`` and ``left[:, n]``, with ``n = 0`` the lowest
band.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    ComplexSpectrum,
    DegenerateSpectrum,
    DimensionMismatch,
    NotPseudoHermitian,
    ZeroVector,
)

MAX_DIM = 16
BIORTHO_TOL = 1e-12
REALITY_TOL = 1e-10


class GaugeConvention(Enum):
    LARGEST = "largest-magnitude-component-real-positive"
    FIRST_NONZERO = "first-nonzero-component-real-positive"


@dataclass(frozen=True)
class BiorthogonalEigensystem:
    energies: np.ndarray
    right: np.ndarray
    left: np.ndarray
    residual: float

    def __post_init__(self):
        for arr in (self.energies, self.right, self.left):
            arr.setflags(write=False)

    @property
    def dim(self) -> int:
        return len(self.energies)

    @property
    def right_vectors(self) -> list[np.ndarray]:
        return [self.right[:, n] for n in range(self.dim)]

    @property
    def left_vectors(self) -> list[np.ndarray]:
        return [self.left[:, n] for n in range(self.dim)]

    def gap(self, n: int = 0) -> float:
        """Smallest distance from band ``n`` to any other band."""
        others = np.delete(self.energies, n)
        return float(np.min(np.abs(others - self.energies[n])))


def as_matrix(H) -> np.ndarray:
    M = np.asarray(H, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    if M.shape[0] > MAX_DIM:
        raise DimensionMismatch(f"dimension {M.shape[0]} exceeds supported maximum {MAX_DIM}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def biorthonormality_residual(left: np.ndarray, right: np.ndarray) -> float:
    overlap = left.conj().T @ right
    return float(np.max(np.abs(overlap - np.eye(overlap.shape[0]))))


def _pivot_index(v: np.ndarray, convention: GaugeConvention) -> int:
    mags = np.abs(v)
    if convention is GaugeConvention.LARGEST:
        # first near-maximal entry, so ties do not flip with rounding
        return int(np.flatnonzero(mags >= mags.max() * (1 - 1e-12))[0])
    nz = np.flatnonzero(mags > 1e-12 * mags.max())
    return int(nz[0])


def gauge_fix(vectors, convention: GaugeConvention = GaugeConvention.LARGEST, partners=None, pivots=None):
    """Rotate the phase of each vector so one designated component is real positive.

    ``vectors`` is a single vector or a matrix of column vectors. When
    ``partners`` is given (the biorthogonal left partners), each partner
    receives the inverse-conjugate rescaling so ``<L|R>`` is unchanged and
    the pair ``(vectors, partners)`` is returned.

    ``pivots`` overrides the component chosen per column; finite-difference
    code passes the pivots picked at a central point to keep the gauge
    smooth across neighbouring parameter values.
    """
    V = np.array(vectors, dtype=complex)
    single = V.ndim == 1
    if single:
        V = V[:, None]
    P = None if partners is None else np.array(partners, dtype=complex).reshape(V.shape)
    for k in range(V.shape[1]):
        col = V[:, k]
        if not np.any(col):
            raise ZeroVector(f"column {k} is the zero vector")
        idx = _pivot_index(col, convention) if pivots is None else pivots[k]
        z = col[idx]
        if z == 0:
            raise ZeroVector(f"pivot component {idx} of column {k} vanishes")
        phase = np.conj(z) / abs(z)
        V[:, k] = col * phase
        V[idx, k] = abs(z)
        if P is not None:
            # L -> L / conj(c) with |c| = 1 is L * c
            P[:, k] = P[:, k] * phase
    if single:
        V = V[:, 0]
        if P is not None:
            P = P[:, 0]
    return V if P is None else (V, P)


def _null_vector_2x2(M: np.ndarray) -> np.ndarray:
    # rank-one 2x2: use the row with the larger norm
    r0, r1 = M[0], M[1]
    row = r0 if np.linalg.norm(r0) >= np.linalg.norm(r1) else r1
    if not np.any(row):
        return np.array([1.0, 0.0], dtype=complex)
    return np.array([row[1], -row[0]], dtype=complex)


def _eig_2x2(H: np.ndarray):
    half_tr = 0.5 * (H[0, 0] + H[1, 1])
    det = H[0, 0] * H[1, 1] - H[0, 1] * H[1, 0]
    root = np.sqrt(half_tr * half_tr - det + 0j)
    # pick the branch with nonnegative real part so E[0] <= E[1] for real spectra
    if root.real < 0 or (root.real == 0 and root.imag < 0):
        root = -root
    raw = np.array([half_tr - root, half_tr + root])
    right = np.empty((2, 2), dtype=complex)
    left = np.empty((2, 2), dtype=complex)
    I = np.eye(2)
    for n, E in enumerate(raw):
        right[:, n] = _null_vector_2x2(H - E * I)
        left[:, n] = _null_vector_2x2((H - E * I).conj().T)
    return raw, right, left


def _eig_generic(H: np.ndarray):
    raw, right = np.linalg.eig(H)
    raw_l, left = np.linalg.eig(H.conj().T)
    order = np.argsort(raw.real, kind="stable")
    raw, right = raw[order], right[:, order]
    # pair left vectors by overlap; for a nondegenerate spectrum only the
    # partner has a non-negligible overlap with each right vector
    overlaps = np.abs(left.conj().T @ right)
    paired = np.empty_like(left)
    used: set[int] = set()
    for n in range(H.shape[0]):
        cand = [j for j in np.argsort(-overlaps[:, n]) if j not in used]
        j = cand[0]
        used.add(j)
        if abs(np.conj(raw_l[j]) - raw[n]) > 1e-6 * max(1.0, np.max(np.abs(raw))):
            raise DegenerateSpectrum("left/right eigenvalue pairing failed")
        paired[:, n] = left[:, j]
    return raw, right, paired


def eig_biorthogonal(H, tol: float | None = None, convention: GaugeConvention = GaugeConvention.LARGEST) -> BiorthogonalEigensystem:
    """Biorthogonal eigensystem of a non-Hermitian matrix with real spectrum.

    Raises :class:`ComplexSpectrum` if any eigenvalue has an imaginary part
    above ``1e-10 * max|E|`` and :class:`DegenerateSpectrum` if two
    eigenvalues are closer than ``tol`` (default ``1e-9 * ||H||``).
    """
    H = as_matrix(H)
    scale = float(np.linalg.norm(H, 2))
    if tol is None:
        tol = 1e-9 * scale
    raw, right, left = _eig_2x2(H) if H.shape[0] == 2 else _eig_generic(H)

    emax = float(np.max(np.abs(raw)))
    if np.max(np.abs(raw.imag)) > REALITY_TOL * max(emax, np.finfo(float).tiny):
        raise ComplexSpectrum(f"eigenvalues {raw} are not real")
    energies = raw.real.copy()
    gaps = np.diff(energies)
    if len(gaps) and np.min(gaps) <= tol:
        raise DegenerateSpectrum(f"minimum gap {np.min(gaps):.3e} <= tol {tol:.3e}")

    right = right / np.linalg.norm(right, axis=0)
    right, left = gauge_fix(right, convention, partners=left)
    # biorthogonalize: L <- L (R^dag L)^{-1}; exact pairing up to roundoff
    M = left.conj().T @ right
    left = left @ np.linalg.inv(M).conj().T
    return BiorthogonalEigensystem(energies, right, left, biorthonormality_residual(left, right))


def left_from_right(right, eta, H=None) -> np.ndarray:
    """Left eigenvectors ``eta @ R`` rescaled to ``<L_n|R_n> = 1``.

    With ``H`` supplied, the pseudo-Hermiticity ``H^dag = eta H eta^{-1}``
    is checked first.
    """
    R = np.array(right, dtype=complex)
    single = R.ndim == 1
    if single:
        R = R[:, None]
    eta = as_matrix(eta)
    if np.max(np.abs(eta - eta.conj().T)) > 1e-12 * max(1.0, np.abs(eta).max()):
        raise NotPseudoHermitian("eta is not Hermitian")
    sv = np.linalg.svd(eta, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise NotPseudoHermitian("eta is singular")
    if H is not None:
        H = as_matrix(H)
        resid = np.linalg.norm(H.conj().T - eta @ H @ np.linalg.inv(eta), 2)
        if resid > 1e-10 * np.linalg.norm(H, 2):
            raise NotPseudoHermitian(f"||H^dag - eta H eta^-1|| = {resid:.3e}")
    L = eta @ R
    norms = np.einsum("ij,ij->j", L.conj(), R)
    if np.any(np.abs(norms) < 1e-14):
        raise NotPseudoHermitian("eta-norm of a right vector vanishes")
    L = L / norms.conj()
    return L[:, 0] if single else L
