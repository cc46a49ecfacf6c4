import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phqgt.errors import ComplexEigenvalues, NonPositiveQ, UnknownDirection
from phqgt.linalg import eig_biorthogonal
from phqgt.models import CustomModel, HamiltonianFamily, ModelI, ModelII, bloch, compile_expression, q_pauli

PAULI = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)
angles = st.floats(-2 * math.pi, 2 * math.pi)


class _Fixed:
    """A constant Bloch vector, for checking single-matrix examples."""

    param_names = ("a", "b")
    reference_point = (0.0, 0.0)

    def __init__(self, d):
        self.d = np.asarray(d, dtype=float)

    def bloch(self, lam):
        return self.d

    def bloch_derivative(self, lam, mu):
        return np.zeros(3)


def fixed_family(d, q):
    return HamiltonianFamily(_Fixed(d), q)


class TestQPauli:
    def test_hermitian_limit(self):
        b = q_pauli(1.0)
        assert (b.a, b.b, b.c, b.d) == (1.0, 1.0, 1.0, 0.0)
        np.testing.assert_allclose(b.sigmas, PAULI, atol=0)
        np.testing.assert_allclose(b.eta, np.eye(2), atol=0)

    def test_q3_constants(self):
        b = q_pauli(3.0)
        assert b.a == pytest.approx(2.2360680, abs=1e-7)
        assert b.b == pytest.approx(0.7453560, abs=1e-7)
        assert b.a == pytest.approx(math.sqrt(5), rel=1e-15)
        assert b.b == pytest.approx(math.sqrt(5) / 3, rel=1e-15)
        assert b.c == pytest.approx(5 / 3, rel=1e-15)
        assert b.d == pytest.approx(-4 / 3, rel=1e-15)

    def test_q3_sigma_x_and_metric(self):
        b = q_pauli(3.0)
        sx = b.sigmas[0]
        np.testing.assert_allclose(sx, [[0, math.sqrt(5)], [math.sqrt(5) / 3, 0]], rtol=1e-15)
        np.testing.assert_allclose(b.eta, np.diag([3 ** -0.5, 3 ** 0.5]), rtol=1e-15)
        assert np.linalg.norm(sx.conj().T - b.eta @ sx @ b.eta_inv) <= 1e-14

    @pytest.mark.parametrize("q", [0.0, -1.0])
    def test_nonpositive(self, q):
        with pytest.raises(NonPositiveQ):
            q_pauli(q)

    @settings(max_examples=50, deadline=None)
    @given(q=st.floats(0.1, 10.0), d=st.tuples(*[st.floats(-5, 5)] * 3))
    def test_pseudo_hermiticity(self, q, d):
        b = q_pauli(q)
        H = np.einsum("i,ijk->jk", np.array(d), b.sigmas)
        resid = np.linalg.norm(H.conj().T - b.eta @ H @ b.eta_inv, 2)
        assert resid <= 1e-12 * max(np.linalg.norm(H, 2), 1e-300) + 1e-300

    @settings(max_examples=30, deadline=None)
    @given(q=st.floats(0.1, 10.0))
    def test_constant_identities(self, q):
        b = q_pauli(q)
        assert b.a * b.b == pytest.approx(b.c, rel=1e-13)
        assert b.c == pytest.approx((1 + q * q) / (2 * q), rel=1e-15)
        assert b.d == pytest.approx((1 - q * q) / (2 * q), rel=1e-15, abs=1e-15)


class TestBloch:
    def test_model1_pole(self):
        m = ModelI(3.0, 2.0, 0.5)
        for phi in (0.0, 1.0, 4.0):
            assert bloch(m, (0.0, phi)) == pytest.approx((0.0, 0.0, 1.25))

    def test_model2_origin(self):
        assert bloch(ModelII(7.0), (0.0, 0.0)) == pytest.approx((0.0, 0.0, 7.0))

    def test_model1_equator_fig1(self):
        m = ModelI.from_cycles(10, 15, 0)
        d = bloch(m, (math.pi / 2, 0.0))
        assert d.dx == pytest.approx(10 * math.pi, rel=1e-15)
        assert d.dy == pytest.approx(0.0, abs=1e-13)
        assert d.dz == pytest.approx(0.0, abs=1e-13)

    @settings(max_examples=30, deadline=None)
    @given(x=angles, y=angles)
    def test_model2_formula(self, x, y):
        B = 3.0
        expected = B * np.array([math.sin(x + y) * math.cos(x * y), math.sin(x + y) * math.sin(x * y), math.cos(x + y)])
        np.testing.assert_allclose(bloch(ModelII(B), (x, y)), expected, atol=1e-14)

    def test_vectorized(self):
        m = ModelII(2.0)
        xs, ys = np.linspace(-1, 1, 5), np.linspace(0, 2, 5)
        batch = m.bloch((xs, ys))
        for k in range(5):
            np.testing.assert_allclose(batch[:, k], m.bloch((xs[k], ys[k])), atol=0)


class TestHamiltonian:
    def test_sigma_z_q3(self):
        np.testing.assert_allclose(fixed_family((0, 0, 1), 3.0).hamiltonian(None), np.diag([1 / 3, -3]), rtol=1e-15)

    def test_sigma_x_q3(self):
        H = fixed_family((1, 0, 0), 3.0).hamiltonian(None)
        np.testing.assert_allclose(H, [[0, math.sqrt(5)], [math.sqrt(5) / 3, 0]], rtol=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(d=st.tuples(*[st.floats(-5, 5)] * 3))
    def test_hermitian_at_q1(self, d):
        H = fixed_family(d, 1.0).hamiltonian(None)
        assert np.linalg.norm(H - H.conj().T) <= 1e-14

    @pytest.mark.parametrize("which", ["fig1", "fig3"])
    def test_pseudo_hermitian_on_grid(self, which, fig1_family, fig3_family):
        fam = fig1_family if which == "fig1" else fig3_family
        for l1 in np.linspace(-2 * math.pi, 2 * math.pi, 21):
            for l2 in (0.0, 0.7, math.pi / 2):
                H = fam.hamiltonian((l1, l2))
                r = np.linalg.norm(H.conj().T - fam.eta @ H @ fam.basis.eta_inv, 2)
                assert r <= 1e-12 * np.linalg.norm(H, 2)

    def test_batch_matches_single(self, fig3_family):
        lams = np.array([[0.1, 0.2], [1.0, -0.5], [2.0, 1.5]])
        H = fig3_family.hamiltonian_batch(lams)
        dH = fig3_family.dhamiltonian_batch(lams, 1)
        for k, lam in enumerate(lams):
            np.testing.assert_allclose(H[k], fig3_family.hamiltonian(tuple(lam)), atol=1e-15)
            np.testing.assert_allclose(dH[k], fig3_family.dhamiltonian(tuple(lam), 1), atol=1e-15)


class TestEigenvalues:
    def test_diagonal(self):
        assert fixed_family((0, 0, 1), 3.0).eigenvalues_closed_form(None) == pytest.approx((-3.0, 1 / 3), rel=1e-15)

    def test_sigma_x(self):
        lo, hi = fixed_family((1, 0, 0), 3.0).eigenvalues_closed_form(None)
        assert hi == pytest.approx(math.sqrt(5 / 3), rel=1e-15)
        assert lo == pytest.approx(-1.2909944, abs=1e-7)
        np.testing.assert_allclose(eig_biorthogonal(fixed_family((1, 0, 0), 3.0).hamiltonian(None)).energies, (lo, hi), rtol=1e-12)

    def test_hermitian_unit(self):
        d = np.array([0.6, 0.0, 0.8])
        assert fixed_family(d, 1.0).eigenvalues_closed_form(None) == pytest.approx((-1.0, 1.0), rel=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(q=st.floats(0.2, 5.0), d=st.tuples(*[st.floats(-5, 5)] * 3))
    def test_agrees_with_eigensolver(self, q, d):
        if np.linalg.norm(d) < 1e-2:
            return
        fam = fixed_family(d, q)
        ref = eig_biorthogonal(fam.hamiltonian(None)).energies
        np.testing.assert_allclose(fam.eigenvalues_closed_form(None), ref, rtol=1e-10, atol=1e-12)

    def test_complex_radicand_reported(self):
        # q_pauli always gives ab > 0; a basis with b < 0 stands in for a broken deformation
        fam = fixed_family((1, 0, 0), 3.0)
        object.__setattr__(fam, "basis", replace(fam.basis, b=-fam.basis.b))
        with pytest.raises(ComplexEigenvalues):
            fam.eigenvalues_closed_form(None)


def _fd_dH(fam, lam, mu, h):
    e = np.zeros(2)
    e[mu] = h
    lam = np.asarray(lam, dtype=float)
    return (fam.hamiltonian(tuple(lam + e)) - fam.hamiltonian(tuple(lam - e))) / (2 * h)


class TestForces:
    def test_model1_equator_theta(self, fig1_family):
        delta1 = 2 * math.pi * 15
        f = fig1_family.generalized_force((math.pi / 2, 0.0), "theta")
        np.testing.assert_allclose(f, 0.5 * delta1 * fig1_family.basis.sigmas[2], atol=1e-12)

    def test_model1_equator_phi(self, fig1_family):
        omega1 = 2 * math.pi * 10
        f = fig1_family.generalized_force((math.pi / 2, 0.0), "phi")
        np.testing.assert_allclose(f, -0.5 * omega1 * fig1_family.basis.sigmas[1], atol=1e-12)

    def test_model1_general_formula(self):
        m = ModelI(1.3, 0.7, 0.2)
        th, ph = 0.8, 2.1
        np.testing.assert_allclose(m.bloch_derivative((th, ph), 0),
                                   0.5 * np.array([1.3 * math.cos(th) * math.cos(ph), 1.3 * math.cos(th) * math.sin(ph), -0.7 * math.sin(th)]))
        np.testing.assert_allclose(m.bloch_derivative((th, ph), 1),
                                   0.5 * np.array([-1.3 * math.sin(th) * math.sin(ph), 1.3 * math.sin(th) * math.cos(ph), 0.0]))

    @pytest.mark.parametrize("mu", [0, 1])
    def test_model2_fd(self, fig3_family, mu):
        lam = (1.0, 0.5)
        err = np.max(np.abs(fig3_family.dhamiltonian(lam, mu) - _fd_dH(fig3_family, lam, mu, 1e-4)))
        assert err <= 1e-6 * max(1.0, np.max(np.abs(fig3_family.dhamiltonian(lam, mu))))

    @pytest.mark.parametrize("which,mu", [("fig1", 0), ("fig1", 1), ("fig3", 0), ("fig3", 1)])
    def test_second_order_convergence(self, fig1_family, fig3_family, which, mu):
        fam = fig1_family if which == "fig1" else fig3_family
        lam = (0.9, 0.4)
        exact = fam.dhamiltonian(lam, mu)
        e1 = np.max(np.abs(exact - _fd_dH(fam, lam, mu, 1e-2)))
        e2 = np.max(np.abs(exact - _fd_dH(fam, lam, mu, 5e-3)))
        assert 3.5 < e1 / e2 < 4.5
        assert np.max(np.abs(exact - _fd_dH(fam, lam, mu, 1e-4))) <= 1e-6 * max(1.0, np.abs(exact).max())

    def test_unknown_direction(self, fig1_family):
        with pytest.raises(UnknownDirection):
            fig1_family.generalized_force((0.1, 0.1), "x")
        with pytest.raises(UnknownDirection):
            fig1_family.generalized_force((0.1, 0.1), 2)

    def test_names_and_indices_agree(self, fig3_family):
        np.testing.assert_array_equal(fig3_family.dhamiltonian((0.3, 0.2), "y"), fig3_family.dhamiltonian((0.3, 0.2), 1))


class TestCustomModel:
    def test_reproduces_model2(self, fig3_family):
        B = 2 * math.pi * 15
        custom = CustomModel.from_expressions(f"{B}*sin(x+y)*cos(x*y)", f"{B}*sin(x+y)*sin(x*y)", f"{B}*cos(x+y)", ("x", "y"))
        fam = HamiltonianFamily(custom, 3.0)
        lam = (0.4, 1.2)
        np.testing.assert_allclose(fam.hamiltonian(lam), fig3_family.hamiltonian(lam), rtol=1e-14)
        np.testing.assert_allclose(fam.dhamiltonian(lam, 0), fig3_family.dhamiltonian(lam, 0), rtol=1e-6, atol=1e-6)

    @pytest.mark.parametrize("expr", ["__import__('os')", "x.real", "open('f')", "lambda: 1", "x[0]"])
    def test_rejects_unsafe_expressions(self, expr):
        with pytest.raises((ValueError, SyntaxError)):
            compile_expression(expr, ("x", "y"))

    def test_constants(self):
        assert compile_expression("pi/2", ())() == pytest.approx(math.pi / 2)
