import numpy as np
import pytest

from fieldlab import detect, fieldsim, onticmap
from fieldlab.detect import DetectionStats, DetectorConfig, UndefinedG2Error
from fieldlab.fieldsim import GaussianFieldSpec, PureFieldSpec, SuperpositionFieldSpec
from fieldlab.onticmap import ZeroFieldError

N_MC = 100_000


def make_stats(winner, trials=None):
    """Build DetectionStats from a boolean (trials, channels) crossing table."""
    winner = np.asarray(winner, dtype=bool)
    trials = winner.shape[0] if trials is None else trials
    per_trial = winner.sum(axis=1)
    pair = winner.astype(np.int64).T @ winner.astype(np.int64)
    np.fill_diagonal(pair, 0)
    return DetectionStats(
        trials=trials,
        threshold=1.0,
        clicks_per_channel=winner[per_trial == 1].sum(axis=0).astype(np.int64),
        coincidences=int((per_trial >= 2).sum()),
        no_click_trials=trials - int((per_trial >= 1).sum()),
        crossings_per_channel=winner.sum(axis=0).astype(np.int64),
        pair_coincidences=pair,
    )


class TestEnsembleDetectionProbs:
    def test_pure_field_concentrates_on_one_channel(self):
        ens = fieldsim.sample_pure_field([1.0, 0.0], sigma2=1.0, n=1000, seed=0)
        np.testing.assert_array_equal(detect.ensemble_detection_probs(ens), [1.0, 0.0])

    def test_symmetric_superposition_splits_evenly(self):
        spec = SuperpositionFieldSpec(np.array([1.0, 1.0]) / np.sqrt(2))
        ens = fieldsim.sample_field(spec, N_MC, seed=1)
        np.testing.assert_allclose(detect.ensemble_detection_probs(ens), [0.5, 0.5], atol=0.01)

    def test_gaussian_energy_ratios(self):
        ens = fieldsim.sample_gaussian_field(np.diag([1.0, 3.0]), N_MC, seed=2)
        np.testing.assert_allclose(detect.ensemble_detection_probs(ens), [0.25, 0.75], atol=0.01)

    def test_sums_to_one_at_machine_precision(self):
        ens = fieldsim.sample_gaussian_field(np.diag([1.0, 3.0]), 10_000, seed=3)
        assert abs(detect.ensemble_detection_probs(ens).sum() - 1.0) < 1e-12

    def test_matches_born_readout_of_empirical_state(self):
        ens = fieldsim.sample_gaussian_field(np.diag([1.0, 3.0]), N_MC, seed=4)
        p_energy = detect.ensemble_detection_probs(ens)
        stats = fieldsim.ensemble_stats(ens)
        p_born = onticmap.born_probabilities(onticmap.to_epistemic(stats.covariance).rho)
        np.testing.assert_allclose(p_energy, p_born, atol=1e-12)

    def test_zero_field_rejected(self):
        with pytest.raises(ZeroFieldError):
            detect.ensemble_detection_probs(np.zeros((10, 2), dtype=complex))


class TestDetectorConfig:
    def test_invalid_settings_rejected(self):
        with pytest.raises(ValueError):
            DetectorConfig(threshold=0.0)
        with pytest.raises(ValueError):
            DetectorConfig(threshold=1.0, background_kappa=-0.1)
        with pytest.raises(ValueError):
            DetectorConfig(threshold=1.0, max_steps=0)
        with pytest.raises(ValueError):
            DetectorConfig(threshold=1.0, dt=0.0)

    def test_basis_dimension_checked_at_run(self):
        cfg = DetectorConfig(threshold=1.0, basis=np.eye(3))
        with pytest.raises(ValueError):
            detect.run_threshold_trials(PureFieldSpec(np.array([1.0, 0.0]), 1.0), cfg, 10, seed=0)

    def test_mean_step_channel_energy(self):
        spec = GaussianFieldSpec(np.diag([1.0, 3.0]))
        cfg = DetectorConfig(threshold=1.0, background_kappa=0.1, dt=0.5)
        assert detect.mean_step_channel_energy(spec, cfg) == pytest.approx(0.5 * (2.0 + 0.1))


class TestThresholdRace:
    def test_every_trial_classified_once(self):
        spec = SuperpositionFieldSpec(np.array([0.6, 0.8]), driver_sigma2=0.5)
        cfg = DetectorConfig(threshold=6.0, background_kappa=0.1, max_steps=18)
        stats = detect.run_threshold_trials(spec, cfg, 3000, seed=5)
        assert stats.clicks_per_channel.sum() + stats.coincidences + stats.no_click_trials == stats.trials
        assert stats.no_click_trials > 0  # max_steps kept short on purpose
        assert stats.clicks_per_channel.sum() > 0 and stats.coincidences > 0

    def test_deterministic_per_seed(self):
        spec = SuperpositionFieldSpec(np.array([0.6, 0.8]), driver_sigma2=0.5)
        cfg = DetectorConfig(threshold=3.0, background_kappa=0.1, max_steps=200)
        a = detect.run_threshold_trials(spec, cfg, 500, seed=6)
        b = detect.run_threshold_trials(spec, cfg, 500, seed=6)
        assert a.to_json() == b.to_json()

    def test_noiseless_pure_field_always_clicks_its_channel(self):
        spec = PureFieldSpec(np.array([1.0, 0.0]), sigma2=1.0)
        cfg = DetectorConfig(threshold=5.0, background_kappa=0.0, max_steps=500)
        stats = detect.run_threshold_trials(spec, cfg, 2000, seed=7)
        assert stats.coincidences == 0
        assert stats.clicks_per_channel[1] == 0
        assert stats.clicks_per_channel[0] + stats.no_click_trials == stats.trials

    def test_symmetric_superposition_frequencies_balance(self):
        spec = SuperpositionFieldSpec(np.array([1.0, 1.0]) / np.sqrt(2))
        cfg = DetectorConfig(threshold=20 * 0.6, background_kappa=0.1, max_steps=400)
        stats = detect.run_threshold_trials(spec, cfg, 10_000, seed=8)
        singles = stats.clicks_per_channel.sum()
        p_hat = stats.clicks_per_channel[0] / singles
        se = np.sqrt(0.25 / singles)
        assert abs(p_hat - 0.5) <= 3 * se

    def test_label_symmetry_under_basis_permutation(self):
        # for the symmetric superposition the channel signals coincide, so a
        # basis relabeling must leave every recorded count in place, and the
        # two labels must agree up to sampling noise
        spec = SuperpositionFieldSpec(np.array([1.0, 1.0]) / np.sqrt(2))
        perm = np.eye(2)[:, ::-1]
        cfg = DetectorConfig(threshold=6.0, background_kappa=0.1, max_steps=300)
        cfg_perm = DetectorConfig(threshold=6.0, background_kappa=0.1, max_steps=300, basis=perm)
        stats = detect.run_threshold_trials(spec, cfg, 4000, seed=9)
        stats_perm = detect.run_threshold_trials(spec, cfg_perm, 4000, seed=9)
        np.testing.assert_array_equal(stats_perm.clicks_per_channel, stats.clicks_per_channel)
        assert stats_perm.coincidences == stats.coincidences
        singles = stats.clicks_per_channel.sum()
        assert abs(stats.clicks_per_channel[0] - stats.clicks_per_channel[1]) <= 4 * np.sqrt(singles * 0.25)

    def test_coincidences_shrink_with_threshold(self):
        spec = SuperpositionFieldSpec(np.array([0.6, 0.8]), driver_sigma2=0.5)
        base = DetectorConfig(threshold=1.0, background_kappa=0.1)
        unit = detect.mean_step_channel_energy(spec, base)
        fractions = []
        for mult in (5, 10, 20, 40):
            cfg = DetectorConfig(threshold=mult * unit, background_kappa=0.1, max_steps=600)
            stats = detect.run_threshold_trials(spec, cfg, 4000, seed=10)
            fractions.append(stats.coincidence_fraction)
        assert all(a >= b for a, b in zip(fractions, fractions[1:]))

    def test_huge_threshold_gives_no_clicks(self):
        spec = PureFieldSpec(np.array([1.0, 0.0]), sigma2=1.0)
        cfg = DetectorConfig(threshold=1e6, background_kappa=0.0, max_steps=5)
        stats = detect.run_threshold_trials(spec, cfg, 100, seed=11)
        assert stats.no_click_trials == 100
        assert stats.clicking_trials == 0
        np.testing.assert_array_equal(stats.frequencies, [0.0, 0.0])

    def test_invalid_trial_count(self):
        spec = PureFieldSpec(np.array([1.0, 0.0]), sigma2=1.0)
        with pytest.raises(ValueError):
            detect.run_threshold_trials(spec, DetectorConfig(threshold=1.0), 0, seed=0)


class TestG2Zero:
    def test_exclusive_clicks_give_zero(self):
        winner = np.zeros((100, 2), dtype=bool)
        winner[:50, 0] = True
        winner[50:, 1] = True
        assert detect.g2_zero(make_stats(winner)) == 0.0

    def test_half_joint_with_half_marginals(self):
        # both channels cross together in half the trials: g2 = 0.5/(0.5*0.5)
        winner = np.zeros((100, 2), dtype=bool)
        winner[:50] = True
        stats = make_stats(winner)
        assert detect.g2_zero(stats) == pytest.approx(2.0)

    def test_independent_channels_approach_one(self):
        rng = np.random.default_rng(12)
        winner = rng.random((200_000, 2)) < 0.3
        stats = make_stats(winner)
        assert detect.g2_zero(stats) == pytest.approx(1.0, abs=0.03)

    def test_zero_marginal_is_undefined(self):
        winner = np.zeros((10, 2), dtype=bool)
        winner[:, 0] = True
        with pytest.raises(UndefinedG2Error):
            detect.g2_zero(make_stats(winner))

    def test_same_channel_rejected(self):
        winner = np.ones((10, 2), dtype=bool)
        with pytest.raises(ValueError):
            detect.g2_zero(make_stats(winner), (1, 1))


class TestStatsPayload:
    def test_partition_enforced_on_construction(self):
        with pytest.raises(ValueError):
            DetectionStats(
                trials=10,
                threshold=1.0,
                clicks_per_channel=np.array([5, 5]),
                coincidences=1,
                no_click_trials=0,
                crossings_per_channel=np.array([6, 6]),
                pair_coincidences=np.zeros((2, 2), dtype=np.int64),
            )

    def test_frequencies_condition_on_clicks(self):
        winner = np.zeros((10, 2), dtype=bool)
        winner[:4, 0] = True
        winner[4:6, 1] = True
        stats = make_stats(winner)
        assert stats.no_click_trials == 4
        np.testing.assert_allclose(stats.frequencies, [4 / 6, 2 / 6])
        assert stats.frequencies.sum() <= 1.0

    def test_json_fields(self):
        winner = np.zeros((10, 2), dtype=bool)
        winner[:5, 0] = True
        payload = make_stats(winner).to_json()
        assert payload["trials"] == 10
        assert payload["clicks_per_channel"] == [5, 0]
        assert payload["no_click_trials"] == 5

    def test_json_stays_strict_without_clicks(self):
        import json

        payload = make_stats(np.zeros((10, 2), dtype=bool)).to_json()
        assert payload["mean_steps_to_click"] is None
        json.loads(json.dumps(payload, allow_nan=False))
