"""Nonunitary evolution along the quadratic parameter ramp.

The ramp starts at rest at ``lam_tar - dlam * e_mu`` and reaches the target
with speed ``v`` at ``t_f = 2 * dlam / v``. States are renormalized every
step; the discarded positive scale is accumulated in ``log_scale``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np
import scipy.linalg
from scipy.integrate import quad

from .errors import DegenerateSpectrum, StepRejected, TimeOutOfRange, ZeroVector
from .linalg import eig_biorthogonal


@dataclass(frozen=True)
class RampSchedule:
    lam_tar: tuple
    mu: int
    dlam: float
    v: float

    def __post_init__(self):
        if self.dlam <= 0 or self.v <= 0:
            raise ValueError("dlam and v must be positive")
        object.__setattr__(self, "lam_tar", tuple(float(x) for x in self.lam_tar))

    @property
    def t_f(self) -> float:
        return 2.0 * self.dlam / self.v

    @property
    def start(self) -> tuple:
        return ramp_value(self, 0.0)

    def offset(self, t):
        """Displacement along ``e_mu`` relative to ``lam_tar`` (vectorized)."""
        return -self.dlam + self.v * self.v * np.asarray(t) ** 2 / (4.0 * self.dlam)

    def velocity(self, t):
        return self.v * self.v * np.asarray(t) / (2.0 * self.dlam)

    def points(self, times) -> np.ndarray:
        """Parameter points of shape (K, 2) at an array of times."""
        times = np.asarray(times, dtype=float)
        lams = np.tile(np.asarray(self.lam_tar), (times.size, 1))
        lams[:, self.mu] += self.offset(times)
        return lams


def ramp_value(schedule: RampSchedule, t: float) -> tuple:
    if t < -1e-12 * schedule.t_f or t > schedule.t_f * (1 + 1e-12):
        raise TimeOutOfRange(f"t = {t} outside [0, {schedule.t_f}]")
    if t >= schedule.t_f:
        return schedule.lam_tar
    lam = list(schedule.lam_tar)
    lam[schedule.mu] += float(schedule.offset(max(t, 0.0)))
    return tuple(lam)


class EvolutionGenerator(Enum):
    H = "H"
    H_DAGGER = "H_dagger"
    MINUS_H_DAGGER = "minus_H_dagger"

    def apply(self, H: np.ndarray) -> np.ndarray:
        if self is EvolutionGenerator.H:
            return H
        Hd = np.conj(np.swapaxes(H, -1, -2))
        return Hd if self is EvolutionGenerator.H_DAGGER else -Hd


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step integrator settings.

    ``method`` is one of ``"magnus4"`` (two exponentials per step at the
    Gauss nodes, fourth order), ``"midpoint"`` (one exponential at the step
    midpoint, second order) or ``"rk4"``. ``steps`` is the number of steps
    spanning ``t_f``; ``record_every`` > 0 stores every n-th state.
    """

    method: str = "magnus4"
    steps: int = 2000
    max_log_growth: float = 1.0
    record_every: int = 0

    def __post_init__(self):
        if self.method not in ("magnus4", "midpoint", "rk4"):
            raise ValueError(f"unknown integrator method {self.method!r}")
        if self.steps < 1:
            raise ValueError("steps must be positive")


@dataclass
class EvolvedState:
    vector: np.ndarray
    log_scale: float
    schedule: RampSchedule
    generator: EvolutionGenerator
    trajectory: list | None = field(default=None, repr=False)


def expm_batch(M: np.ndarray) -> np.ndarray:
    """Matrix exponential of a stack of matrices, closed form for 2x2."""
    M = np.asarray(M, dtype=complex)
    if M.shape[-1] != 2:
        return scipy.linalg.expm(M)
    m0 = 0.5 * (M[..., 0, 0] + M[..., 1, 1])
    N = M - m0[..., None, None] * np.eye(2)
    s = np.sqrt(-(N[..., 0, 0] * N[..., 1, 1] - N[..., 0, 1] * N[..., 1, 0]) + 0j)
    small = np.abs(s) < 1e-6
    safe = np.where(small, 1.0, s)
    sinhc = np.where(small, 1 + s * s / 6, np.sinh(safe) / safe)
    out = np.cosh(s)[..., None, None] * np.eye(2) + sinhc[..., None, None] * N
    return np.exp(m0)[..., None, None] * out


_GAUSS = (0.5 - math.sqrt(3) / 6, 0.5 + math.sqrt(3) / 6)
_CF4 = ((3 - 2 * math.sqrt(3)) / 12, (3 + 2 * math.sqrt(3)) / 12)


def _step_operators(hamiltonians, t_f, generator, config):
    """Per-step propagators for a path; ``hamiltonians(times)`` returns a (K, N, N) stack."""
    n = config.steps
    dt = t_f / n
    t0 = np.arange(n) * dt

    def G(times):
        return generator.apply(hamiltonians(times))

    if config.method == "midpoint":
        return expm_batch(-1j * dt * G(t0 + 0.5 * dt)), dt
    if config.method == "magnus4":
        A1, A2 = G(t0 + _GAUSS[0] * dt), G(t0 + _GAUSS[1] * dt)
        a1, a2 = _CF4
        first = expm_batch(-1j * dt * (a2 * A1 + a1 * A2))
        second = expm_batch(-1j * dt * (a1 * A1 + a2 * A2))
        return second @ first, dt
    # rk4: the propagator of one classical RK4 step is a matrix polynomial
    K0, K1, K2 = G(t0), G(t0 + 0.5 * dt), G(t0 + dt)
    I = np.eye(K0.shape[-1])
    k1 = -1j * K0
    k2 = -1j * K1 @ (I + 0.5 * dt * k1)
    k3 = -1j * K1 @ (I + 0.5 * dt * k2)
    k4 = -1j * K2 @ (I + dt * k3)
    return I + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4), dt


def _propagate(psi, U, dt, max_log_growth, record_every=0):
    psi = np.array(psi, dtype=complex)
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ZeroVector("initial state is zero")
    psi /= norm
    log_scale = math.log(norm)
    trajectory = [(0.0, psi.copy(), log_scale)] if record_every else None
    for k in range(len(U)):
        psi = U[k] @ psi
        n = math.sqrt((psi.real @ psi.real) + (psi.imag @ psi.imag))
        growth = math.log(n) if n > 0 else -math.inf
        if not abs(growth) <= max_log_growth:
            raise StepRejected(f"step {k}: log norm change {growth:.3e} exceeds {max_log_growth}")
        psi /= n
        log_scale += growth
        if trajectory is not None and (k + 1) % record_every == 0:
            trajectory.append(((k + 1) * dt, psi.copy(), log_scale))
    return psi, log_scale, trajectory


def evolve(initial, family, schedule: RampSchedule, generator: EvolutionGenerator, config: IntegratorConfig | None = None) -> EvolvedState:
    """Solve ``i d psi/dt = G(t) psi`` over ``[0, t_f]`` with ``G`` in {H, H^dag, -H^dag}."""
    config = config or IntegratorConfig()
    U, dt = _step_operators(lambda times: family.hamiltonian_batch(schedule.points(times)),
                            schedule.t_f, generator, config)
    psi, log_scale, trajectory = _propagate(initial, U, dt, config.max_log_growth, config.record_every)
    return EvolvedState(psi, log_scale, schedule, generator, trajectory)


def write_trajectory_csv(state: EvolvedState, path) -> None:
    """Dump a recorded trajectory: t, re/im of each component, log_scale."""
    if not state.trajectory:
        raise ValueError("state has no recorded trajectory (set record_every)")
    dim = len(state.vector)
    header = ["t"] + [f"{p}_{i}" for i in range(dim) for p in ("re", "im")] + ["log_scale"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t, vec, ls in state.trajectory:
            row = [t] + [x for c in vec for x in (c.real, c.imag)] + [ls]
            w.writerow([format(float(x), ".12g") for x in row])


class StateTriple(NamedTuple):
    psi: EvolvedState
    psi_prime: EvolvedState
    psi_double_prime: EvolvedState


@dataclass(frozen=True)
class AdiabaticReport:
    v_prep: float
    speed_bound: float

    @property
    def ratio(self) -> float:
        return self.v_prep / self.speed_bound


def speed_bound(family, path: np.ndarray, direction: np.ndarray) -> float:
    """Minimum over ``path`` of ``gap**2 / |<L_1| dH/ds |R_0>|`` for a unit direction ``s``."""
    best = math.inf
    for lam in path:
        s = eig_biorthogonal(family.hamiltonian(lam))
        dH = direction[0] * family.dhamiltonian(lam, 0) + direction[1] * family.dhamiltonian(lam, 1)
        coupling = abs(s.left[:, 1].conj() @ dH @ s.right[:, 0])
        if coupling > 0:
            best = min(best, s.gap(0) ** 2 / coupling)
    return best


def prepare_ground_pair(family, lam_start, v_prep: float = 1.0, config: IntegratorConfig | None = None):
    """Right and left ground states at ``lam_start`` prepared by an adiabatic ramp.

    Starts from the ground state at the model's reference point and moves in
    a straight line with profile ``x - sin(2 pi x) / (2 pi)`` (zero speed at
    both ends, peak speed ``v_prep``). Returns ``(right, left, report)``.
    """
    config = config or IntegratorConfig()
    ref = np.asarray(family.model.reference_point, dtype=float)
    target = np.asarray(lam_start, dtype=float)
    dist = float(np.linalg.norm(target - ref))
    s0 = eig_biorthogonal(family.hamiltonian(ref))
    right, left = s0.right[:, 0], s0.left[:, 0]
    if dist == 0:
        return right, left, AdiabaticReport(v_prep, math.inf)
    unit = (target - ref) / dist
    T = 2.0 * dist / v_prep

    def lams(times):
        x = np.asarray(times) / T
        return ref + np.outer(x - np.sin(2 * np.pi * x) / (2 * np.pi), target - ref)

    out = []
    for gen, vec in ((EvolutionGenerator.H, right), (EvolutionGenerator.H_DAGGER, left)):
        U, dt = _step_operators(lambda times: family.hamiltonian_batch(lams(times)), T, gen, config)
        out.append(_propagate(vec, U, dt, config.max_log_growth)[0])
    report = AdiabaticReport(v_prep, speed_bound(family, lams(np.linspace(0, T, 41)), unit))
    return out[0], out[1], report


def prepare_triple(family, lam_tar, mu, dlam: float = math.pi / 2, v: float = 1.0,
                   config: IntegratorConfig | None = None, preparation: str = "eigensolve",
                   v_prep: float = 1.0) -> StateTriple:
    """Evolve psi (right, under H), psi' (left, under H^dag) and psi'' (left, under -H^dag).

    All three share the ramp along ``mu``. ``preparation="adiabatic"``
    prepares the initial ground states by a ramp from the reference point
    instead of an exact eigensolve.
    """
    mu = family.direction(mu)
    schedule = RampSchedule(tuple(lam_tar), mu, dlam, v)
    start = schedule.start
    if preparation == "eigensolve":
        s = eig_biorthogonal(family.hamiltonian(start))
        right, left = s.right[:, 0], s.left[:, 0]
    elif preparation == "adiabatic":
        right, left, _ = prepare_ground_pair(family, start, v_prep, config)
    else:
        raise ValueError(f"unknown preparation {preparation!r}")
    return StateTriple(
        evolve(right, family, schedule, EvolutionGenerator.H, config),
        evolve(left, family, schedule, EvolutionGenerator.H_DAGGER, config),
        evolve(left, family, schedule, EvolutionGenerator.MINUS_H_DAGGER, config),
    )


@dataclass(frozen=True)
class APTExpansion:
    """First-order adiabatic expansion at time ``t``.

    ``coefficients[m - 1]`` multiplies excited band ``m``; ``dynamical`` and
    ``geometric`` hold Theta_n(t) and Phi_n(t) for every band.
    """

    t: float
    lam: tuple
    coefficients: np.ndarray
    dynamical: np.ndarray
    geometric: np.ndarray
    system: object = field(repr=False, default=None)

    def state(self) -> np.ndarray:
        """``R_0 + sum_m a_m R_m`` in the eigensystem's gauge."""
        R = self.system.right
        return R[:, 0] + R[:, 1:] @ self.coefficients


def _eta_normalized_right(family, lam, band, pivot):
    s = eig_biorthogonal(family.hamiltonian(lam))
    r = s.right[:, band]
    r = r * (abs(r[pivot]) / r[pivot])
    norm = np.real(r.conj() @ family.eta @ r)
    return r / math.sqrt(norm)


def _berry_connection(family, lam, mu, band, h=1e-5):
    """``<L_n| d_mu R_n>`` in the eta-normalized gauge, where it is purely imaginary."""
    center = eig_biorthogonal(family.hamiltonian(lam))
    pivot = int(np.argmax(np.abs(center.right[:, band])))
    r0 = _eta_normalized_right(family, lam, band, pivot)
    lp, lm = list(lam), list(lam)
    lp[mu] += h
    lm[mu] -= h
    dr = (_eta_normalized_right(family, lp, band, pivot) - _eta_normalized_right(family, lm, band, pivot)) / (2 * h)
    return (family.eta @ r0).conj() @ dr


def apt_coefficients(family, schedule: RampSchedule, t: float) -> APTExpansion:
    lam = ramp_value(schedule, t)
    system = eig_biorthogonal(family.hamiltonian(lam))
    E = system.energies
    if system.gap(0) <= 0:
        raise DegenerateSpectrum("ground band is degenerate")
    dH = family.dhamiltonian(lam, schedule.mu)
    vel = float(schedule.velocity(t))
    R0, L = system.right[:, 0], system.left
    coeffs = np.array([
        1j * vel * (L[:, m].conj() @ dH @ R0) / (E[0] - E[m]) / (E[m] - E[0])
        for m in range(1, system.dim)
    ])

    def energy(tp, n):
        return eig_biorthogonal(family.hamiltonian(ramp_value(schedule, tp))).energies[n]

    def phase_rate(tp, n, part):
        conn = _berry_connection(family, ramp_value(schedule, tp), schedule.mu, n)
        val = -1j * float(schedule.velocity(tp)) * conn
        return val.real if part == "re" else val.imag

    theta = np.array([quad(energy, 0.0, t, args=(n,))[0] for n in range(system.dim)])
    phi = np.empty(system.dim)
    phi_imag = np.empty(system.dim)
    for n in range(system.dim):
        phi[n] = quad(phase_rate, 0.0, t, args=(n, "re"))[0]
        phi_imag[n] = quad(phase_rate, 0.0, t, args=(n, "im"))[0]
    if np.max(np.abs(phi_imag)) > 1e-10 * max(1.0, np.max(np.abs(phi))):
        raise ValueError(f"geometric phases not real: imaginary parts {phi_imag}")
    return APTExpansion(float(t), lam, coeffs, theta, phi, system)


def projective_distance(u, w) -> float:
    """``sqrt(1 - |<u|w>|^2 / (|u|^2 |w|^2))``; zero iff the rays coincide."""
    u, w = np.asarray(u), np.asarray(w)
    fid = abs(np.vdot(u, w)) ** 2 / (np.vdot(u, u).real * np.vdot(w, w).real)
    return math.sqrt(max(0.0, 1.0 - fid))
