"""Quantum geometric tensor of pseudo-Hermitian two-band models: analytic references and dynamical measurement schemes."""

from .circuit import build_output_state, gev_via_circuit, readout
from .dynamics import (
    EvolutionGenerator,
    IntegratorConfig,
    RampSchedule,
    apt_coefficients,
    evolve,
    prepare_triple,
    projective_distance,
    ramp_value,
)
from .linalg import BiorthogonalEigensystem, eig_biorthogonal, gauge_fix, left_from_right
from .measurement import (
    chern_scan,
    force_constant,
    gev,
    qgt_scan,
    scheme1_qgt,
    scheme2_curvature,
    scheme2_metric,
)
from .models import CustomModel, HamiltonianFamily, ModelI, ModelII, q_pauli
from .qgt import berry_curvature, chern_number, metric_curvature, qgt_fd, qgt_spectral

__all__ = [
    "BiorthogonalEigensystem", "CustomModel", "EvolutionGenerator", "HamiltonianFamily", "IntegratorConfig",
    "ModelI", "ModelII", "RampSchedule", "apt_coefficients", "berry_curvature", "build_output_state",
    "chern_number", "chern_scan", "eig_biorthogonal", "evolve", "force_constant", "gauge_fix", "gev",
    "gev_via_circuit", "left_from_right", "metric_curvature", "prepare_triple", "projective_distance",
    "q_pauli", "qgt_fd", "qgt_scan", "qgt_spectral", "ramp_value", "readout", "scheme1_qgt",
    "scheme2_curvature", "scheme2_metric",
]
