import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fieldlab import linops


def random_hermitian(seed, dim):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (a + a.conj().T) / 2


def random_psd(seed, dim):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return g @ g.conj().T / dim


class TestMakeProjector:
    def test_standard_basis_vector(self):
        np.testing.assert_array_equal(
            linops.make_projector([1.0, 0.0]), np.array([[1, 0], [0, 0]], dtype=complex)
        )

    def test_equal_superposition(self):
        psi = np.array([1.0, 1.0]) / np.sqrt(2)
        np.testing.assert_allclose(linops.make_projector(psi), np.full((2, 2), 0.5), atol=1e-15)

    def test_scales_quadratically(self):
        np.testing.assert_array_equal(
            linops.make_projector([2.0, 0.0]), np.array([[4, 0], [0, 0]], dtype=complex)
        )

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            linops.make_projector([0.0, 0.0])

    @given(st.integers(0, 2**32 - 1), st.integers(2, 8))
    @settings(max_examples=30, deadline=None)
    def test_normalized_projector_is_idempotent_unit_trace(self, seed, dim):
        rng = np.random.default_rng(seed)
        psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        psi /= np.linalg.norm(psi)
        proj = linops.make_projector(psi)
        assert np.linalg.norm(proj @ proj - proj) < 1e-10
        assert abs(np.trace(proj) - 1.0) < 1e-10
        # pure states are density operators
        assert linops.is_density(proj).ok


class TestIsDensity:
    def test_maximally_mixed(self):
        assert linops.is_density(np.eye(2) / 2).ok

    def test_diagonal_quarters(self):
        # eigenvalues 0.25 and 0.75 by inspection, trace one
        check = linops.is_density(np.diag([1.0, 3.0]) / 4)
        assert check.ok and check.psd and check.unit_trace

    def test_trace_violation_reported(self):
        check = linops.is_density(np.diag([0.5, 0.6]))
        assert not check.ok
        assert not check.unit_trace
        assert check.hermitian and check.psd
        assert "trace" in check.failures()[0]

    def test_negative_eigenvalue_reported(self):
        check = linops.is_density(np.diag([1.5, -0.5]))
        assert not check.ok and not check.psd
        assert check.min_eigenvalue == pytest.approx(-0.5)

    def test_non_hermitian_reported(self):
        m = np.array([[0.5, 0.3], [0.0, 0.5]], dtype=complex)
        check = linops.is_density(m)
        assert not check.ok and not check.hermitian


class TestHermitianEig:
    def test_diagonal_sorted_descending(self):
        evals, evecs = linops.hermitian_eig(np.diag([3.0, 1.0]))
        np.testing.assert_allclose(evals, [3.0, 1.0])
        np.testing.assert_allclose(np.abs(evecs), np.eye(2), atol=1e-14)

    def test_projector_spectrum(self):
        evals, evecs = linops.hermitian_eig(np.full((2, 2), 0.5))
        np.testing.assert_allclose(evals, [1.0, 0.0], atol=1e-14)
        np.testing.assert_allclose(evecs[:, 0], np.array([1, 1]) / np.sqrt(2), atol=1e-12)

    @given(st.integers(0, 2**32 - 1), st.integers(2, 16))
    @settings(max_examples=30, deadline=None)
    def test_reconstruction(self, seed, dim):
        h = random_hermitian(seed, dim)
        evals, evecs = linops.hermitian_eig(h)
        recon = (evecs * evals) @ evecs.conj().T
        assert np.linalg.norm(recon - h) < 1e-10 * max(1.0, np.linalg.norm(h))

    def test_phase_fixing_deterministic(self):
        h = random_hermitian(11, 4)
        _, v1 = linops.hermitian_eig(h)
        _, v2 = linops.hermitian_eig(h.copy())
        np.testing.assert_array_equal(v1, v2)
        anchors = [v1[np.flatnonzero(np.abs(v1[:, j]) > 1e-8)[0], j] for j in range(4)]
        for a in anchors:
            assert abs(a.imag) < 1e-12 and a.real >= 0

    def test_non_hermitian_rejected(self):
        with pytest.raises(ValueError):
            linops.hermitian_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))

    @given(st.integers(0, 2**32 - 1), st.integers(2, 8))
    @settings(max_examples=20, deadline=None)
    def test_density_spectrum_in_unit_interval(self, seed, dim):
        psd = random_psd(seed, dim)
        rho = psd / np.trace(psd).real
        evals, _ = linops.hermitian_eig(rho)
        assert evals.min() >= -linops.DEFAULT_TOL_PSD
        assert evals.max() <= 1.0 + linops.DEFAULT_TOL_PSD
        assert abs(evals.sum() - 1.0) <= linops.DEFAULT_TOL_TRACE


class TestPsdSqrt:
    def test_diagonal(self):
        np.testing.assert_allclose(linops.psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)

    def test_identity(self):
        np.testing.assert_allclose(linops.psd_sqrt(np.eye(3)), np.eye(3), atol=1e-14)

    def test_projector_is_own_root(self):
        psi = np.array([1.0, 1.0j]) / np.sqrt(2)
        proj = linops.make_projector(psi)
        np.testing.assert_allclose(linops.psd_sqrt(proj), proj, atol=1e-12)

    @given(st.integers(0, 2**32 - 1), st.integers(2, 64))
    @settings(max_examples=25, deadline=None)
    def test_root_squares_back(self, seed, dim):
        b = random_psd(seed, dim)
        root = linops.psd_sqrt(b)
        assert np.linalg.norm(root @ root - b) < 1e-8
        assert np.linalg.norm(root - root.conj().T) < 1e-12

    def test_small_negatives_clamped(self):
        b = np.diag([1.0, -0.5e-9])
        root = linops.psd_sqrt(b)
        np.testing.assert_allclose(root, np.diag([1.0, 0.0]), atol=1e-12)

    def test_genuinely_negative_rejected(self):
        with pytest.raises(linops.NotPositiveSemidefiniteError):
            linops.psd_sqrt(np.diag([1.0, -0.1]))


class TestFrobeniusDistance:
    def test_zero_for_equal(self):
        assert linops.frobenius_distance(np.eye(2), np.eye(2)) == 0.0

    def test_two_unit_entries(self):
        assert linops.frobenius_distance(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])) == pytest.approx(np.sqrt(2))

    def test_epsilon_shift(self):
        b = random_hermitian(3, 2)
        eps = 1e-4
        assert linops.frobenius_distance(b, b + eps * np.eye(2)) == pytest.approx(eps * np.sqrt(2))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            linops.frobenius_distance(np.eye(2), np.eye(3))


class TestJsonRoundTrip:
    @given(st.integers(0, 2**32 - 1), st.integers(1, 12))
    @settings(max_examples=25, deadline=None)
    def test_matrix_exact(self, seed, dim):
        rng = np.random.default_rng(seed)
        m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        wire = json.loads(json.dumps(linops.matrix_to_json(m)))
        np.testing.assert_array_equal(linops.matrix_from_json(wire), m)

    def test_vector_exact(self):
        v = np.array([1 / 3, -2 / 7 + 0.1j, 1e-300 + 1e300j])
        wire = json.loads(json.dumps(linops.vector_to_json(v)))
        np.testing.assert_array_equal(linops.vector_from_json(wire), v)

    def test_malformed_payload_rejected(self):
        with pytest.raises(ValueError):
            linops.matrix_from_json({"dim": 2, "re": [1.0], "im": [0.0]})
