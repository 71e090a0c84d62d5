import itertools

import numpy as np
import pytest

from fieldlab import fieldsim, linops, onticmap
from fieldlab.onticmap import ZeroFieldError


def random_density(seed, dim):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    b = g @ g.conj().T
    return b / np.trace(b).real


class TestToEpistemic:
    def test_identity_covariance(self):
        img = onticmap.to_epistemic(np.eye(2))
        np.testing.assert_allclose(img.rho, np.eye(2) / 2, atol=1e-15)
        assert img.sigma2 == 2.0

    def test_diagonal_covariance(self):
        img = onticmap.to_epistemic(np.diag([1.0, 3.0]))
        np.testing.assert_allclose(img.rho, np.diag([0.25, 0.75]), atol=1e-15)
        assert img.sigma2 == 4.0
        assert linops.is_density(img.rho).ok

    def test_scaling_invariance(self):
        b = np.array([[1.0, 0.2 - 0.1j], [0.2 + 0.1j, 0.5]])
        base = onticmap.to_epistemic(b)
        np.testing.assert_array_equal(onticmap.to_epistemic(2.0 * b).rho, base.rho)
        np.testing.assert_allclose(onticmap.to_epistemic(3.0 * b).rho, base.rho, rtol=1e-14)

    def test_zero_field_rejected(self):
        with pytest.raises(ZeroFieldError):
            onticmap.to_epistemic(np.zeros((2, 2)))

    def test_non_psd_rejected(self):
        with pytest.raises(linops.NotPositiveSemidefiniteError):
            onticmap.to_epistemic(np.diag([2.0, -0.5]))


class TestFromEpistemic:
    def test_unit_energy(self):
        rho = np.eye(2) / 2
        np.testing.assert_array_equal(onticmap.from_epistemic(rho, 1.0), rho)

    def test_inverse_of_diagonal_example(self):
        b = onticmap.from_epistemic(np.diag([0.25, 0.75]), 4.0)
        np.testing.assert_allclose(b, np.diag([1.0, 3.0]), atol=1e-15)

    @pytest.mark.parametrize("sigma2", [0.5, 1.0, 10.0])
    def test_round_trip(self, sigma2):
        rho = random_density(21, 3)
        img = onticmap.to_epistemic(onticmap.from_epistemic(rho, sigma2))
        np.testing.assert_allclose(img.rho, rho, atol=1e-14)
        assert img.sigma2 == pytest.approx(sigma2, rel=1e-14)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            onticmap.from_epistemic(np.eye(2) / 2, 0.0)
        with pytest.raises(ValueError):
            onticmap.from_epistemic(np.diag([0.5, 0.6]), 1.0)


class TestBornProbabilities:
    def test_equal_superposition_standard_basis(self):
        psi = np.array([1.0, 1.0]) / np.sqrt(2)
        probs = onticmap.born_probabilities(linops.make_projector(psi))
        np.testing.assert_allclose(probs, [0.5, 0.5], atol=1e-15)

    def test_eigenbasis_readout(self):
        psi = np.array([1.0, 1.0]) / np.sqrt(2)
        psi_perp = np.array([1.0, -1.0]) / np.sqrt(2)
        basis = np.column_stack([psi, psi_perp])
        probs = onticmap.born_probabilities(linops.make_projector(psi), basis)
        np.testing.assert_allclose(probs, [1.0, 0.0], atol=1e-15)

    def test_diagonal_readout(self):
        probs = onticmap.born_probabilities(np.diag([0.25, 0.75]))
        np.testing.assert_array_equal(probs, [0.25, 0.75])

    def test_noise_clamped_and_renormalized(self):
        rho = np.diag([1.0 + 5e-10, -5e-10])
        probs = onticmap.born_probabilities(rho)
        assert probs.min() >= 0.0
        assert probs.sum() == pytest.approx(1.0, abs=1e-15)

    def test_incomplete_basis_rejected(self):
        rho = np.eye(2) / 2
        with pytest.raises(ValueError):
            onticmap.born_probabilities(rho, np.array([[1.0], [0.0]]))

    def test_non_orthonormal_basis_rejected(self):
        rho = np.eye(2) / 2
        with pytest.raises(ValueError):
            onticmap.born_probabilities(rho, np.array([[1.0, 1.0], [0.0, 0.0]]))

    def test_sums_to_one_for_random_states(self):
        for seed in range(5):
            rho = random_density(seed, 4)
            probs = onticmap.born_probabilities(rho)
            assert abs(probs.sum() - 1.0) < 1e-9
            assert probs.min() >= 0.0


class TestEquivalence:
    def test_scalar_multiples_are_equivalent(self):
        b = np.array([[1.0, 0.3], [0.3, 2.0]], dtype=complex)
        assert onticmap.equivalent(b, 2.0 * b)
        assert onticmap.equivalent(b, b)

    def test_permuted_diagonal_not_equivalent(self):
        a, b = np.diag([1.0, 3.0]), np.diag([3.0, 1.0])
        assert not onticmap.equivalent(a, b)
        assert linops.frobenius_distance(a / 4, b / 4) == pytest.approx(0.5 * np.sqrt(2))

    def test_zero_trace_rejected(self):
        with pytest.raises(ZeroFieldError):
            onticmap.equivalent(np.zeros((2, 2)), np.eye(2))

    def test_equivalence_relation_properties(self):
        base = np.array([[1.0, 0.3], [0.3, 2.0]], dtype=complex)
        operators = [base, 2 * base, 0.5 * base, np.diag([1.0, 3.0]), np.diag([2.0, 6.0])]
        tol = 1e-9
        for op in operators:
            assert onticmap.equivalent(op, op, tol)
        for a, b in itertools.permutations(operators, 2):
            assert onticmap.equivalent(a, b, tol) == onticmap.equivalent(b, a, tol)
        for a, b, c in itertools.permutations(operators, 3):
            if onticmap.equivalent(a, b, tol) and onticmap.equivalent(b, c, tol):
                assert onticmap.equivalent(a, c, tol)


class TestEndToEnd:
    def test_sampled_covariance_recovers_state(self):
        rho = np.array([[0.25, 0.2], [0.2, 0.75]], dtype=complex)
        b = onticmap.from_epistemic(rho, sigma2=3.0)
        ens = fieldsim.sample_gaussian_field(b, 100_000, seed=33)
        stats = fieldsim.ensemble_stats(ens)
        img = onticmap.to_epistemic(stats.covariance)
        assert linops.frobenius_distance(img.rho, rho) < 5 * np.trace(b).real / np.sqrt(ens.n) / 3.0

    def test_born_matches_channel_energy_fraction(self):
        b = np.diag([1.0, 3.0])
        ens = fieldsim.sample_gaussian_field(b, 100_000, seed=34)
        stats = fieldsim.ensemble_stats(ens)
        probs = onticmap.born_probabilities(onticmap.to_epistemic(stats.covariance).rho)
        energy_fraction = fieldsim.energy_along(ens, [1.0, 0.0]) / stats.dispersion
        assert probs[0] == pytest.approx(energy_fraction, abs=1e-12)

    def test_image_serializes(self):
        img = onticmap.to_epistemic(np.diag([1.0, 3.0]))
        payload = img.to_json()
        assert payload["sigma2"] == 4.0
        np.testing.assert_array_equal(linops.matrix_from_json(payload["rho"]), img.rho)
