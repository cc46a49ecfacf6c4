"""q-deformed two-band Hamiltonians ``H = d . sigma~``.

Frequencies are angular (``2*pi`` times the per-cycle numbers used in
figure captions); time is in the reciprocal unit with hbar = 1. Use the
``from_cycles`` constructors to build models from per-2pi values.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ComplexEigenvalues, NonPositiveQ, UnknownDirection

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class QDeformedBasis:
    q: float
    a: float
    b: float
    c: float
    d: float
    sigma_x: np.ndarray
    sigma_y: np.ndarray
    sigma_z: np.ndarray
    eta: np.ndarray

    @property
    def sigmas(self) -> np.ndarray:
        """Stack of shape (3, 2, 2)."""
        return np.stack([self.sigma_x, self.sigma_y, self.sigma_z])

    @property
    def eta_inv(self) -> np.ndarray:
        return np.diag(1.0 / np.diag(self.eta))


def q_pauli(q: float) -> QDeformedBasis:
    if not q > 0:
        raise NonPositiveQ(f"q must be positive, got {q}")
    q = float(q)
    a = math.sqrt((1 + q * q) / 2)
    b = math.sqrt((1 + q ** -2) / 2)
    c = (1 + q * q) / (2 * q)
    d = (1 - q * q) / (2 * q)
    sx = np.array([[0, a], [b, 0]], dtype=complex)
    sy = np.array([[0, -1j * a], [1j * b, 0]], dtype=complex)
    sz = np.array([[1 / q, 0], [0, -q]], dtype=complex)
    eta = np.diag([q ** -0.5, q ** 0.5]).astype(complex)
    for m in (sx, sy, sz, eta):
        m.setflags(write=False)
    return QDeformedBasis(q, a, b, c, d, sx, sy, sz, eta)


class BlochVector(NamedTuple):
    dx: float
    dy: float
    dz: float


@dataclass(frozen=True)
class ModelI:
    """Haldane-like spin model on the (theta, phi) sphere."""

    omega1: float
    delta1: float
    delta2: float = 0.0

    param_names = ("theta", "phi")
    reference_point = (0.0, 0.0)

    @classmethod
    def from_cycles(cls, omega1: float, delta1: float, delta2: float = 0.0) -> "ModelI":
        return cls(TWO_PI * omega1, TWO_PI * delta1, TWO_PI * delta2)

    def bloch(self, lam):
        th, ph = lam
        s = np.sin(th)
        return 0.5 * np.array([
            self.omega1 * s * np.cos(ph),
            self.omega1 * s * np.sin(ph),
            self.delta1 * np.cos(th) + self.delta2 + 0.0 * ph,
        ])

    def bloch_derivative(self, lam, mu: int):
        th, ph = lam
        if mu == 0:
            return 0.5 * np.array([
                self.omega1 * np.cos(th) * np.cos(ph),
                self.omega1 * np.cos(th) * np.sin(ph),
                -self.delta1 * np.sin(th) + 0.0 * ph,
            ])
        return 0.5 * np.array([
            -self.omega1 * np.sin(th) * np.sin(ph),
            self.omega1 * np.sin(th) * np.cos(ph),
            0.0 * th + 0.0 * ph,
        ])


@dataclass(frozen=True)
class ModelII:
    """Model with nonvanishing off-diagonal metric, parameters (x, y)."""

    B: float

    param_names = ("x", "y")
    reference_point = (0.0, 0.0)

    @classmethod
    def from_cycles(cls, B: float) -> "ModelII":
        return cls(TWO_PI * B)

    def bloch(self, lam):
        x, y = lam
        s, p = x + y, x * y
        return self.B * np.array([np.sin(s) * np.cos(p), np.sin(s) * np.sin(p), np.cos(s)])

    def bloch_derivative(self, lam, mu: int):
        x, y = lam
        s, p = x + y, x * y
        dp = y if mu == 0 else x  # ds/dmu = 1 for both directions
        return self.B * np.array([
            np.cos(s) * np.cos(p) - np.sin(s) * np.sin(p) * dp,
            np.cos(s) * np.sin(p) + np.sin(s) * np.cos(p) * dp,
            -np.sin(s),
        ])


_SAFE_FUNCS = {
    name: getattr(np, name)
    for name in ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "tanh", "arctan", "abs")
}
_SAFE_CONSTS = {"pi": math.pi, "e": math.e}
_ALLOWED_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd, ast.Mod,
)


def compile_expression(expr: str, names: Sequence[str]) -> Callable[..., float]:
    """Compile an arithmetic expression over ``names`` without ``eval`` on arbitrary code."""
    tree = ast.parse(str(expr), mode="eval")
    allowed = set(names) | set(_SAFE_CONSTS) | set(_SAFE_FUNCS)
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ValueError(f"unsupported syntax {type(node).__name__} in {expr!r}")
        if isinstance(node, ast.Name) and node.id not in allowed:
            raise ValueError(f"unknown name {node.id!r} in {expr!r}")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in _SAFE_FUNCS):
            raise ValueError(f"unsupported call in {expr!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ValueError(f"unsupported constant in {expr!r}")
    code = compile(tree, "<expr>", "eval")
    env = {"__builtins__": {}, **_SAFE_FUNCS, **_SAFE_CONSTS}

    def fn(*args):
        return eval(code, env, dict(zip(names, args)))  # noqa: S307 - AST whitelisted above

    return fn


@dataclass(frozen=True)
class CustomModel:
    """User-supplied Bloch vector; forces by central finite differences."""

    bloch_fn: Callable
    param_names: tuple = ("l1", "l2")
    reference_point: tuple = (0.0, 0.0)
    fd_step: float = 1e-5

    @classmethod
    def from_expressions(cls, dx: str, dy: str, dz: str, params=("l1", "l2"), reference_point=(0.0, 0.0)):
        fns = [compile_expression(e, params) for e in (dx, dy, dz)]

        def bloch_fn(l1, l2):
            return [f(l1, l2) for f in fns]

        return cls(bloch_fn, tuple(params), tuple(reference_point))

    def bloch(self, lam):
        l1, l2 = lam
        out = [np.asarray(c, dtype=float) + 0.0 * l1 + 0.0 * l2 for c in self.bloch_fn(l1, l2)]
        return np.array(out)

    def bloch_derivative(self, lam, mu: int):
        h = self.fd_step
        lp = [lam[0], lam[1]]
        lm = [lam[0], lam[1]]
        lp[mu] = lp[mu] + h
        lm[mu] = lm[mu] - h
        return (self.bloch(lp) - self.bloch(lm)) / (2 * h)


@dataclass(frozen=True)
class HamiltonianFamily:
    """A model paired with a q-deformation; all accessors take ``lam = (l1, l2)``."""

    model: object
    q: float = 3.0
    basis: QDeformedBasis = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "basis", q_pauli(self.q))

    @property
    def param_names(self) -> tuple:
        return tuple(self.model.param_names)

    @property
    def eta(self) -> np.ndarray:
        return self.basis.eta

    def direction(self, mu) -> int:
        """Normalize a direction given as index or parameter name."""
        if isinstance(mu, (int, np.integer)) and not isinstance(mu, bool) and mu in (0, 1):
            return int(mu)
        if isinstance(mu, str) and mu in self.param_names:
            return self.param_names.index(mu)
        raise UnknownDirection(f"unknown direction {mu!r}; expected 0, 1 or one of {self.param_names}")

    def bloch(self, lam) -> BlochVector:
        return BlochVector(*(float(c) for c in self.model.bloch(lam)))

    def _contract(self, vec) -> np.ndarray:
        # vec: (3,) or (3, K) -> (2, 2) or (K, 2, 2)
        vec = np.asarray(vec, dtype=float)
        return np.tensordot(np.moveaxis(vec, 0, -1), self.basis.sigmas, axes=(-1, 0))

    def hamiltonian(self, lam) -> np.ndarray:
        return self._contract(self.model.bloch(lam))

    def hamiltonian_batch(self, lams: np.ndarray) -> np.ndarray:
        """Hamiltonians at an array of points, ``lams`` of shape (K, 2)."""
        lams = np.asarray(lams, dtype=float)
        return self._contract(self.model.bloch((lams[:, 0], lams[:, 1])))

    def dhamiltonian(self, lam, mu) -> np.ndarray:
        return self._contract(self.model.bloch_derivative(lam, self.direction(mu)))

    def dhamiltonian_batch(self, lams: np.ndarray, mu) -> np.ndarray:
        lams = np.asarray(lams, dtype=float)
        return self._contract(self.model.bloch_derivative((lams[:, 0], lams[:, 1]), self.direction(mu)))

    def generalized_force(self, lam, mu) -> np.ndarray:
        """``f_mu = -dH/dlambda_mu``."""
        return -self.dhamiltonian(lam, mu)

    def eigenvalues_closed_form(self, lam) -> tuple[float, float]:
        dx, dy, dz = self.bloch(lam)
        B = self.basis
        radicand = B.a * B.b * (dx * dx + dy * dy) + B.c * B.c * dz * dz
        if radicand < 0:
            raise ComplexEigenvalues(f"radicand {radicand} < 0 at {lam}")
        r = math.sqrt(radicand)
        return B.d * dz - r, B.d * dz + r

    def ground_energy(self, lam) -> float:
        return self.eigenvalues_closed_form(lam)[0]


def bloch(model, lam) -> BlochVector:
    return BlochVector(*(float(c) for c in model.bloch(lam)))
