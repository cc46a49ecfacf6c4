import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phqgt.errors import DegenerateSpectrum, IndexMismatch, StepTooLarge
from phqgt.linalg import eig_biorthogonal
from phqgt.models import HamiltonianFamily, ModelI
from phqgt.qgt import (
    QGTComponent,
    berry_curvature,
    chern_number,
    curvature_phi_spread,
    metric_curvature,
    qgt_fd,
    qgt_from_eigensystem,
    qgt_matrix,
    qgt_spectral,
)

from conftest import effective_hermitian_qgt

# Richardson-extrapolated finite-difference values (h = 1e-4 and 5e-5) for
# Model I, q = 3, Omega1/2pi = 10, Delta1/2pi = 15, Delta2 = 0, at (pi/3, 0).
FIXTURE_POINT = (math.pi / 3, 0.0)
FIXTURE = {
    (0, 0): 0.32921810699461923,
    (1, 1): 0.11111111111111112,
    (1, 0): 0.19125843684940863j,
    (0, 1): -0.19125843684935417j,
}

thetas = st.floats(0.05, math.pi - 0.05)
phis = st.floats(0, 2 * math.pi)


class TestSpectral:
    @settings(max_examples=30, deadline=None)
    @given(th=thetas, ph=phis)
    def test_isotropic_hermitian_values(self, isotropic_family, th, ph):
        Q = qgt_matrix(isotropic_family, (th, ph))
        s = math.sin(th)
        assert Q[0, 0] == pytest.approx(0.25, abs=1e-12)
        assert Q[1, 1] == pytest.approx(s * s / 4, abs=1e-12)
        assert Q[1, 0].imag == pytest.approx(s / 4, abs=1e-12)
        assert Q[1, 0].real == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("key", list(FIXTURE))
    def test_regression_fixture(self, fig1_family, key):
        value = qgt_spectral(fig1_family, FIXTURE_POINT, *key).value
        assert abs(value - FIXTURE[key]) <= 1e-9

    def test_fixture_closed_forms(self):
        # finite-difference roundoff limits the fixture to ~1e-12
        assert FIXTURE[(0, 0)] == pytest.approx(80 / 243, abs=1e-11)
        assert FIXTURE[(1, 1)] == pytest.approx(1 / 9, abs=1e-11)

    @settings(max_examples=40, deadline=None)
    @given(th=thetas, ph=phis, d2=st.floats(0, 60), q=st.floats(0.3, 4.0))
    def test_matches_similar_hermitian_model(self, th, ph, d2, q):
        fam = HamiltonianFamily(ModelI.from_cycles(10, 15, d2), q)
        if abs(d2 - 15) < 0.5:
            return
        np.testing.assert_allclose(qgt_matrix(fam, (th, ph)), effective_hermitian_qgt(fam, (th, ph)), atol=1e-10, rtol=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(x=st.floats(-2 * math.pi, 2 * math.pi), y=st.floats(-2 * math.pi, 2 * math.pi))
    def test_model2_matches_similar_hermitian_model(self, fig3_family, x, y):
        np.testing.assert_allclose(qgt_matrix(fig3_family, (x, y)), effective_hermitian_qgt(fig3_family, (x, y)), atol=1e-10)

    @settings(max_examples=40, deadline=None)
    @given(th=thetas, ph=phis, d2=st.floats(0, 60))
    def test_hermiticity(self, th, ph, d2):
        fam = HamiltonianFamily(ModelI.from_cycles(10, 15, d2), 3.0)
        if abs(d2 - 15) < 0.5:
            return
        Q = qgt_matrix(fam, (th, ph))
        assert np.max(np.abs(Q - Q.conj().T)) <= 1e-10

    def test_model1_off_diagonal_metric_vanishes(self, fig1_family):
        for th in np.linspace(0, math.pi, 21):
            for ph in (0.0, 1.3):
                assert abs(qgt_spectral(fig1_family, (th, ph), 1, 0).value.real) <= 1e-12

    def test_model2_off_diagonal_metric_nonzero(self, fig3_family):
        values = [qgt_spectral(fig3_family, (x, math.pi / 2), 1, 0).value.real for x in np.linspace(-2 * math.pi, 2 * math.pi, 21)]
        assert max(abs(v) for v in values) > 0.1

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_gauge_invariance(self, fig1_family, seed):
        rng = np.random.default_rng(seed)
        lam = (0.9, 0.4)
        s = eig_biorthogonal(fig1_family.hamiltonian(lam))
        c = rng.uniform(0.2, 5.0, 2) * np.exp(1j * rng.uniform(0, 2 * np.pi, 2))
        # R -> c R with L -> L / conj(c) keeps <L|R> = 1
        rescaled = type(s)(s.energies, s.right * c, s.left / c.conj(), s.residual)
        dH = [fig1_family.dhamiltonian(lam, m) for m in (0, 1)]
        for mu in (0, 1):
            for nu in (0, 1):
                a = qgt_from_eigensystem(s, dH[mu], dH[nu])
                b = qgt_from_eigensystem(rescaled, dH[mu], dH[nu])
                assert abs(a - b) <= 1e-12 * max(1.0, abs(a))

    def test_degenerate(self):
        fam = HamiltonianFamily(ModelI(1.0, 1.0, -1.0), 1.0)
        # Bloch vector vanishes at theta = 0 when Delta1 + Delta2 = 0
        with pytest.raises(DegenerateSpectrum):
            qgt_spectral(fam, (0.0, 0.0), 0, 0)


class TestFiniteDifference:
    CASES = [
        ("isotropic", (1.1, 0.3)),
        ("fig1", FIXTURE_POINT),
        ("fig3", (0.7, math.pi / 2)),
    ]

    def _family(self, name, isotropic_family, fig1_family, fig3_family):
        return {"isotropic": isotropic_family, "fig1": fig1_family, "fig3": fig3_family}[name]

    @pytest.mark.parametrize("name,lam", CASES)
    def test_agreement(self, name, lam, isotropic_family, fig1_family, fig3_family):
        fam = self._family(name, isotropic_family, fig1_family, fig3_family)
        for mu in (0, 1):
            for nu in (0, 1):
                fd = qgt_fd(fam, lam, mu, nu, h=1e-4).value
                ref = qgt_spectral(fam, lam, mu, nu).value
                assert abs(fd - ref) <= 1e-6

    @pytest.mark.parametrize("name,lam", CASES)
    def test_second_order(self, name, lam, isotropic_family, fig1_family, fig3_family):
        fam = self._family(name, isotropic_family, fig1_family, fig3_family)
        ref = qgt_spectral(fam, lam, 0, 0).value
        e1 = abs(qgt_fd(fam, lam, 0, 0, h=2e-3).value - ref)
        e2 = abs(qgt_fd(fam, lam, 0, 0, h=1e-3).value - ref)
        assert 3.5 < e1 / e2 < 4.5

    def test_hermitian_diagonal_nonnegative(self, isotropic_family):
        for th in np.linspace(0.2, 3.0, 7):
            v = qgt_fd(isotropic_family, (th, 0.5), 1, 1).value
            assert abs(v.imag) <= 1e-10 and v.real >= 0

    def test_step_too_large(self, fig1_family):
        with pytest.raises(StepTooLarge):
            qgt_fd(fig1_family, FIXTURE_POINT, 0, 0, h=0.5)

    def test_richardson_reproduces_fixture(self, fig1_family):
        for key, value in FIXTURE.items():
            assert abs(qgt_fd(fig1_family, FIXTURE_POINT, *key, extrapolate=True).value - value) <= 1e-10


class TestMetricCurvature:
    def _component(self, value, mu, nu, lam=(0.5, 0.0)):
        return QGTComponent(value, 0, mu, nu, lam)

    def test_real_symmetric(self):
        pair = metric_curvature(self._component(0.25, 0, 1), self._component(0.25, 1, 0))
        assert (pair.g, pair.F) == (0.25, 0.0)

    @pytest.mark.parametrize("th", [0.3, math.pi / 2, 2.5])
    def test_monopole_curvature(self, th):
        s = math.sin(th)
        Q_phitheta = self._component(1j * s / 4, 1, 0)
        Q_thetaphi = self._component(-1j * s / 4, 0, 1)
        F_thetaphi = metric_curvature(Q_thetaphi, Q_phitheta).F
        assert F_thetaphi == pytest.approx(s / 2, abs=1e-15)
        assert F_thetaphi == pytest.approx(2 * Q_phitheta.value.imag, abs=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(re=st.floats(-2, 2), im=st.floats(-2, 2), d1=st.floats(0, 2), d2=st.floats(0, 2))
    def test_symmetries(self, re, im, d1, d2):
        z = complex(re, im)
        a, b = self._component(z, 0, 1), self._component(z.conjugate(), 1, 0)
        ab, ba = metric_curvature(a, b), metric_curvature(b, a)
        assert ab.g == ba.g and ab.F == -ba.F
        assert ab.g == pytest.approx(re) and ab.F == pytest.approx(-2 * im)
        diag = self._component(complex(d1), 0, 0)
        assert metric_curvature(diag, diag).F == 0.0

    def test_index_mismatch(self):
        with pytest.raises(IndexMismatch):
            metric_curvature(self._component(0.1, 0, 1), self._component(0.1, 0, 1))
        with pytest.raises(IndexMismatch):
            metric_curvature(self._component(0.1, 0, 1), self._component(0.1, 1, 0, lam=(0.6, 0.0)))

    def test_agrees_with_berry_curvature(self, fig1_family):
        lam = (1.0, 0.2)
        pair = metric_curvature(qgt_spectral(fig1_family, lam, 0, 1), qgt_spectral(fig1_family, lam, 1, 0))
        assert pair.F == pytest.approx(berry_curvature(fig1_family, lam, 0, 1), abs=1e-12)
        assert pair.g == pytest.approx(0.0, abs=1e-12)


class TestChern:
    def test_isotropic_unit_charge(self, isotropic_family):
        assert chern_number(isotropic_family, n_theta=201).C == pytest.approx(1.0, abs=1e-3)

    @pytest.mark.parametrize("ratio,expected", [(0.0, 1), (0.5, 1), (0.8, 1), (1.2, 0), (2.0, 0)])
    def test_phase_diagram_fine_grid(self, ratio, expected):
        fam = HamiltonianFamily(ModelI.from_cycles(10, 15, 15 * ratio), 3.0)
        res = chern_number(fam, n_theta=401)
        assert abs(res.C - expected) <= 1e-2
        assert res.delta2_over_delta1 == pytest.approx(ratio)

    def test_coarse_grid_trivial_phase(self):
        fam = HamiltonianFamily(ModelI.from_cycles(10, 15, 30), 3.0)
        fine = chern_number(fam, n_theta=2001).C
        coarse = chern_number(fam, n_theta=21).C
        assert abs(fine) <= 1e-3
        assert abs(coarse) <= 0.1

    def test_refinement_tightens_near_critical(self):
        fam = HamiltonianFamily(ModelI.from_cycles(10, 15, 15 * 0.9), 3.0)
        coarse = abs(chern_number(fam, n_theta=21).C - 1)
        fine = abs(chern_number(fam, n_theta=201).C - 1)
        assert fine < coarse

    @pytest.mark.parametrize("d2", [0.0, 10.0, 25.0])
    def test_curvature_phi_independent(self, d2):
        fam = HamiltonianFamily(ModelI.from_cycles(10, 15, d2), 3.0)
        for th in (0.3, 1.2, 2.7):
            assert curvature_phi_spread(fam, th, np.linspace(0, 2 * np.pi, 9)) <= 1e-10

    def test_model2_has_no_chern_coordinate(self, fig3_family):
        assert math.isnan(chern_number(fig3_family, n_theta=5).delta2_over_delta1)
