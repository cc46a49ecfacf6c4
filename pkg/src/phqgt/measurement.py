"""QGT extraction from generalized expectation values of evolved states.

Two schemes are implemented:

* energy fluctuation: ``<psi'_mu|(H - E_0)^2|psi_nu> / <psi'_mu|psi_nu>``
  divided by ``v**2`` gives the complex component ``Q_munu``;
* generalized force: ``<psi'_nu|f_mu|psi_nu>`` (curvature) and
  ``<psi''_nu|f_mu|psi_nu>`` (metric), after subtracting the ground-state
  constant ``<f_mu>``, give ``v F_munu`` and ``2 i v g_munu``.

All expectation values are taken at ``t_f``, where the ramp reaches the
target point with speed ``v``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import EvolutionGenerator, EvolvedState, IntegratorConfig, RampSchedule, evolve, prepare_ground_pair
from .errors import NearOrthogonal, PHQGTError
from .linalg import eig_biorthogonal
from .qgt import qgt_matrix, trapezoid

NEAR_ORTHOGONAL_TOL = 1e-8
RELATIVE_BUDGET = 0.05
ZERO_FLOOR = 0.02
NEAR_CRITICAL = 0.1

GEN = EvolutionGenerator


@dataclass(frozen=True)
class GeneralizedExpectation:
    value: complex
    numerator: complex
    denominator: complex


def gev(psi1, psi2, A) -> GeneralizedExpectation:
    """``<psi1|A|psi2> / <psi1|psi2>``."""
    psi1 = np.asarray(psi1, dtype=complex)
    psi2 = np.asarray(psi2, dtype=complex)
    den = np.vdot(psi1, psi2)
    if abs(den) < NEAR_ORTHOGONAL_TOL * np.linalg.norm(psi1) * np.linalg.norm(psi2):
        raise NearOrthogonal(f"|<psi1|psi2>| = {abs(den):.3e} is too small")
    num = np.vdot(psi1, np.asarray(A) @ psi2)
    return GeneralizedExpectation(complex(num / den), complex(num), complex(den))


@dataclass(frozen=True)
class ConstantTerm:
    value: complex


def force_constant(family, lam_tar, mu) -> ConstantTerm:
    """Ground-state generalized expectation of ``f_mu`` at ``lam_tar``."""
    s = eig_biorthogonal(family.hamiltonian(lam_tar))
    f = family.generalized_force(lam_tar, mu)
    return ConstantTerm(gev(s.left[:, 0], s.right[:, 0], f).value)


@dataclass(frozen=True)
class QGTEstimate:
    lam_tar: tuple
    mu: int
    nu: int
    scheme: str
    v: float
    dlam: float
    t: float
    Q: complex | None = None
    g: float | None = None
    F: float | None = None


class TargetStates:
    """Evolved states for one target point, computed lazily and shared by components."""

    def __init__(self, family, lam_tar, v: float = 1.0, dlam: float = math.pi / 2,
                 config: IntegratorConfig | None = None, preparation: str = "eigensolve"):
        self.family = family
        self.lam_tar = tuple(float(x) for x in lam_tar)
        self.v = v
        self.dlam = dlam
        self.config = config or IntegratorConfig()
        self.preparation = preparation
        self._initial: dict = {}
        self._states: dict = {}

    def schedule(self, mu: int) -> RampSchedule:
        return RampSchedule(self.lam_tar, mu, self.dlam, self.v)

    def _ground(self, mu):
        if mu not in self._initial:
            start = self.schedule(mu).start
            if self.preparation == "adiabatic":
                right, left, _ = prepare_ground_pair(self.family, start, config=self.config)
            else:
                s = eig_biorthogonal(self.family.hamiltonian(start))
                right, left = s.right[:, 0], s.left[:, 0]
            self._initial[mu] = (right, left)
        return self._initial[mu]

    def get(self, mu, generator: EvolutionGenerator) -> EvolvedState:
        mu = self.family.direction(mu)
        key = (mu, generator)
        if key not in self._states:
            right, left = self._ground(mu)
            initial = right if generator is GEN.H else left
            self._states[key] = evolve(initial, self.family, self.schedule(mu), generator, self.config)
        return self._states[key]

    @property
    def t_f(self) -> float:
        return 2.0 * self.dlam / self.v


def fluctuation_operator(family, lam_tar) -> np.ndarray:
    """``(H - E_0)^2`` at ``lam_tar`` with ``E_0`` from the closed form."""
    H = family.hamiltonian(lam_tar)
    shifted = H - family.ground_energy(lam_tar) * np.eye(H.shape[0])
    return shifted @ shifted


def scheme1_qgt(family, lam_tar, mu, nu, v: float = 1.0, dlam: float = math.pi / 2,
                config: IntegratorConfig | None = None, states: TargetStates | None = None) -> QGTEstimate:
    mu, nu = family.direction(mu), family.direction(nu)
    st = states or TargetStates(family, lam_tar, v, dlam, config)
    value = gev(st.get(mu, GEN.H_DAGGER).vector, st.get(nu, GEN.H).vector, fluctuation_operator(family, st.lam_tar)).value
    Q = value / st.v ** 2
    return QGTEstimate(st.lam_tar, mu, nu, "scheme1", st.v, st.dlam, st.t_f, Q=Q, g=Q.real, F=-2 * Q.imag)


def scheme2_curvature(family, lam_tar, mu, nu, v: float = 1.0, dlam: float = math.pi / 2,
                      config: IntegratorConfig | None = None, states: TargetStates | None = None) -> QGTEstimate:
    mu, nu = family.direction(mu), family.direction(nu)
    st = states or TargetStates(family, lam_tar, v, dlam, config)
    f = family.generalized_force(st.lam_tar, mu)
    value = gev(st.get(nu, GEN.H_DAGGER).vector, st.get(nu, GEN.H).vector, f).value
    F = (value - force_constant(family, st.lam_tar, mu).value) / st.v
    return QGTEstimate(st.lam_tar, mu, nu, "scheme2", st.v, st.dlam, st.t_f, F=F.real)


def scheme2_metric(family, lam_tar, mu, nu, v: float = 1.0, dlam: float = math.pi / 2,
                   config: IntegratorConfig | None = None, states: TargetStates | None = None) -> QGTEstimate:
    mu, nu = family.direction(mu), family.direction(nu)
    st = states or TargetStates(family, lam_tar, v, dlam, config)
    f = family.generalized_force(st.lam_tar, mu)
    value = gev(st.get(nu, GEN.MINUS_H_DAGGER).vector, st.get(nu, GEN.H).vector, f).value
    g = (value - force_constant(family, st.lam_tar, mu).value) / (2 * st.v)
    return QGTEstimate(st.lam_tar, mu, nu, "scheme2", st.v, st.dlam, st.t_f, g=g.imag)


def component_names(family, mu=0, nu=1) -> tuple[str, str, str, str]:
    """Column labels for (Q_mumu, Q_nunu, Re Q_numu, Im Q_numu)."""
    a, b = family.param_names[mu], family.param_names[nu]
    return (f"Q_{a}{a}", f"Q_{b}{b}", f"ReQ_{b}{a}", f"ImQ_{b}{a}")


@dataclass
class ScanRow:
    index: int
    lam: tuple
    estimate: dict
    reference: dict
    error: str | None = None

    def abs_errors(self) -> dict:
        return {k: abs(self.estimate[k] - self.reference[k]) for k in self.reference}


def _estimate_point(family, lam, scheme, mu, nu, v, dlam, config) -> list[float]:
    if scheme == "analytic":
        Q = qgt_matrix(family, lam)
        return [Q[mu, mu].real, Q[nu, nu].real, Q[nu, mu].real, Q[nu, mu].imag]
    st = TargetStates(family, lam, v, dlam, config)
    if scheme == "scheme1":
        q_nm = scheme1_qgt(family, lam, nu, mu, states=st).Q
        return [
            scheme1_qgt(family, lam, mu, mu, states=st).Q.real,
            scheme1_qgt(family, lam, nu, nu, states=st).Q.real,
            q_nm.real,
            q_nm.imag,
        ]
    if scheme == "scheme2":
        return [
            scheme2_metric(family, lam, mu, mu, states=st).g,
            scheme2_metric(family, lam, nu, nu, states=st).g,
            scheme2_metric(family, lam, mu, nu, states=st).g,
            0.5 * scheme2_curvature(family, lam, mu, nu, states=st).F,
        ]
    raise ValueError(f"unknown scheme {scheme!r}")


def _scan_point(args) -> ScanRow:
    index, family, lam, scheme, mu, nu, v, dlam, config = args
    names = component_names(family, mu, nu)
    try:
        ref = qgt_matrix(family, lam)
        reference = dict(zip(names, [ref[mu, mu].real, ref[nu, nu].real, ref[nu, mu].real, ref[nu, mu].imag]))
        estimate = dict(zip(names, _estimate_point(family, lam, scheme, mu, nu, v, dlam, config)))
        return ScanRow(index, tuple(lam), estimate, reference)
    except PHQGTError as exc:
        nan = dict.fromkeys(names, math.nan)
        return ScanRow(index, tuple(lam), nan, dict(nan), f"{type(exc).__name__}: {exc}")


def parallel_map(fn, items: list, workers: int = 1) -> list:
    """Ordered map; falls back to serial execution for one worker or unpicklable work."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    try:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    except (TypeError, AttributeError):
        # closures inside custom models cannot be pickled
        return [fn(x) for x in items]


def qgt_scan(family, grid, scheme: str = "scheme1", mu=0, nu=1, v: float = 1.0, dlam: float = math.pi / 2,
             config: IntegratorConfig | None = None, workers: int = 1) -> list[ScanRow]:
    """One row per grid point with the four reported components and spectral references."""
    grid = [tuple(float(x) for x in lam) for lam in grid]
    if not grid:
        raise ValueError("grid is empty")
    mu, nu = family.direction(mu), family.direction(nu)
    config = config or IntegratorConfig()
    jobs = [(i, family, lam, scheme, mu, nu, v, dlam, config) for i, lam in enumerate(grid)]
    rows = parallel_map(_scan_point, jobs, workers)
    return sorted(rows, key=lambda r: r.index)


@dataclass(frozen=True)
class ComponentSummary:
    max_abs_error: float
    mean_abs_error: float
    scan_max: float
    budget: float

    @property
    def passed(self) -> bool:
        return self.max_abs_error <= self.budget


def error_budget(scan_max: float) -> float:
    """5% of the scan maximum, or the absolute floor for identically vanishing components."""
    return RELATIVE_BUDGET * scan_max if scan_max > 1e-9 else ZERO_FLOOR


def summarize(rows: list[ScanRow]) -> dict[str, ComponentSummary]:
    good = [r for r in rows if r.error is None]
    if not good:
        return {}
    out = {}
    for name in good[0].reference:
        errs = np.array([r.abs_errors()[name] for r in good])
        scan_max = float(np.max(np.abs([r.reference[name] for r in good])))
        out[name] = ComponentSummary(float(errs.max()), float(errs.mean()), scan_max, error_budget(scan_max))
    return out


@dataclass
class ChernScanRow:
    delta2: float
    ratio: float
    chern: dict
    near_critical: bool
    errors: list = field(default_factory=list)


def measured_curvature(family, lam, scheme: str, v: float, dlam: float, config, states=None) -> float:
    """F_theta_phi at ``lam`` from one scheme (or the spectral reference)."""
    if scheme == "analytic":
        return 2.0 * qgt_matrix(family, lam)[1, 0].imag
    st = states or TargetStates(family, lam, v, dlam, config)
    if scheme == "scheme1":
        return 2.0 * scheme1_qgt(family, lam, 1, 0, states=st).Q.imag
    if scheme == "scheme2":
        return scheme2_curvature(family, lam, 0, 1, states=st).F
    raise ValueError(f"unknown scheme {scheme!r}")


def _chern_point(args) -> ChernScanRow:
    model, q, delta2, n_theta, schemes, v, dlam, config, phi = args
    from .models import HamiltonianFamily, ModelI

    family = HamiltonianFamily(ModelI(model.omega1, model.delta1, delta2), q)
    thetas = np.linspace(0.0, np.pi, n_theta)
    curv = {s: [] for s in schemes}
    errors = []
    for th in thetas:
        st = TargetStates(family, (th, phi), v, dlam, config)
        for s in schemes:
            try:
                curv[s].append(measured_curvature(family, (th, phi), s, v, dlam, config, st))
            except PHQGTError as exc:
                errors.append(f"{s} theta={th:.6g}: {type(exc).__name__}")
                curv[s].append(math.nan)
    chern = {s: trapezoid(curv[s], thetas) for s in schemes}
    ratio = delta2 / model.delta1
    return ChernScanRow(delta2, ratio, chern, abs(ratio - 1.0) < NEAR_CRITICAL, errors)


def chern_scan(model, q: float, delta2_values, n_theta: int = 21, schemes=("scheme1", "scheme2", "analytic"),
               v: float = 1.0, dlam: float = math.pi / 2, config: IntegratorConfig | None = None,
               phi: float = 0.0, workers: int = 1) -> list[ChernScanRow]:
    """Chern numbers of ModelI variants (``model`` supplies omega1, delta1) for each delta2."""
    config = config or IntegratorConfig()
    jobs = [(model, q, float(d2), n_theta, tuple(schemes), v, dlam, config, phi) for d2 in delta2_values]
    return parallel_map(_chern_point, jobs, workers)


def transition_point(ratios, chern_values, level: float = 0.5) -> float:
    """First downward crossing of ``level``, linearly interpolated; NaN if none."""
    r = np.asarray(ratios, dtype=float)
    c = np.asarray(chern_values, dtype=float)
    for i in range(len(r) - 1):
        if np.isfinite(c[i]) and np.isfinite(c[i + 1]) and c[i] >= level > c[i + 1]:
            return float(r[i] + (c[i] - level) * (r[i + 1] - r[i]) / (c[i] - c[i + 1]))
    return math.nan
