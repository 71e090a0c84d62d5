"""Threshold detection: Born-rule channel probabilities and a click race.

The exact layer, :func:`ensemble_detection_probs`, assigns each channel a
probability proportional to the energy the ensemble carries along that basis
direction; it coincides with the Born readout of the normalized empirical
covariance by construction.

The discrete layer is a first-passage race. Per trial, a fresh field sample
arrives at every step and each channel accumulates

    A_k += dt * |<e_k | phi(t) + noise_k(t)>|^2

where noise_k is an isotropic background of covariance kappa*I drawn
independently per channel and step. The first channel to cross the threshold
claims the trial; two or more channels crossing on the same step record a
coincidence; a trial that never crosses within max_steps is a no-click.
Without the background term a one-dimensional field splits its energy across
channels in fixed proportion and the strongest channel wins every race, so
kappa > 0 is what keeps the competition stochastic. Frequencies drawn from
the race are reported as-is; only their qualitative behavior (symmetry,
coincidence suppression with threshold) is guaranteed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fieldsim import (
    FieldEnsemble,
    FieldSpec,
    analytic_covariance,
    draw_samples,
    require_orthonormal_columns,
)
from .onticmap import ZeroFieldError
from .rng import substream


class UndefinedG2Error(ValueError):
    """Raised when a g2 estimate is requested for a channel with zero marginal."""


def ensemble_detection_probs(ensemble, basis=None) -> np.ndarray:
    """Channel detection probabilities p_k proportional to channel energy.

    p_k = sum_i |<e_k|phi_i>|^2 / sum_i ||phi_i||^2 for a complete
    orthonormal basis; the denominator is computed as the sum of the channel
    energies so the probabilities add to one at machine precision.
    """
    x = ensemble.samples if isinstance(ensemble, FieldEnsemble) else np.asarray(ensemble, dtype=np.complex128)
    dim = x.shape[1]
    e = np.eye(dim, dtype=np.complex128) if basis is None else require_orthonormal_columns(basis, dim=dim)
    channel_energy = np.abs(x @ e.conj()) ** 2
    totals = channel_energy.sum(axis=0)
    grand_total = totals.sum()
    if grand_total <= 0.0:
        raise ZeroFieldError("ensemble carries no energy; detection probabilities undefined")
    return totals / grand_total


@dataclass(frozen=True)
class DetectorConfig:
    """Threshold race settings; ``basis=None`` means the standard basis."""

    threshold: float
    background_kappa: float = 0.0
    max_steps: int = 1000
    dt: float = 1.0
    basis: np.ndarray | None = None

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if self.background_kappa < 0:
            raise ValueError("background_kappa must be nonnegative")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.basis is not None:
            b = require_orthonormal_columns(self.basis)
            b = b.copy()
            b.setflags(write=False)
            object.__setattr__(self, "basis", b)

    def resolve_basis(self, dim: int) -> np.ndarray:
        if self.basis is None:
            return np.eye(dim, dtype=np.complex128)
        if self.basis.shape != (dim, dim):
            raise ValueError(f"detector basis shape {self.basis.shape} does not match field dim {dim}")
        return self.basis


def mean_step_channel_energy(spec: FieldSpec, cfg: DetectorConfig) -> float:
    """Analytic per-step, per-channel accumulation mean: dt*(Tr B/dim + kappa).

    Thresholds quoted as multiples of this quantity make sweeps scale-free.
    """
    trace = float(np.trace(analytic_covariance(spec)).real)
    return cfg.dt * (trace / spec.dim + cfg.background_kappa)


@dataclass(frozen=True)
class DetectionStats:
    """Click bookkeeping for one batch of threshold-race trials.

    Every trial lands in exactly one bucket: a single click for its channel,
    a coincidence (>= 2 channels crossed on the same step), or a no-click.
    ``crossings_per_channel`` counts first-step crossings including shared
    ones; ``pair_coincidences[k, m]`` counts trials where channels k and m
    crossed together, which is what the g2 estimator consumes.
    """

    trials: int
    threshold: float
    clicks_per_channel: np.ndarray
    coincidences: int
    no_click_trials: int
    crossings_per_channel: np.ndarray
    pair_coincidences: np.ndarray
    seed: int = 0
    mean_steps_to_click: float = field(default=float("nan"))

    def __post_init__(self):
        singles = int(self.clicks_per_channel.sum())
        if singles + self.coincidences + self.no_click_trials != self.trials:
            raise ValueError("trial classification does not partition the trials")

    @property
    def n_channels(self) -> int:
        return self.clicks_per_channel.size

    @property
    def clicking_trials(self) -> int:
        return self.trials - self.no_click_trials

    @property
    def frequencies(self) -> np.ndarray:
        """Single-click frequencies conditional on any detection at all."""
        if self.clicking_trials == 0:
            return np.zeros(self.n_channels)
        return self.clicks_per_channel / self.clicking_trials

    @property
    def coincidence_fraction(self) -> float:
        return self.coincidences / self.trials

    @property
    def no_click_fraction(self) -> float:
        return self.no_click_trials / self.trials

    def to_json(self) -> dict:
        return {
            "trials": int(self.trials),
            "threshold": float(self.threshold),
            "seed": int(self.seed),
            "clicks_per_channel": [int(c) for c in self.clicks_per_channel],
            "coincidences": int(self.coincidences),
            "no_click_trials": int(self.no_click_trials),
            "crossings_per_channel": [int(c) for c in self.crossings_per_channel],
            "pair_coincidences": [[int(v) for v in row] for row in self.pair_coincidences],
            "frequencies": [float(f) for f in self.frequencies],
            "coincidence_fraction": float(self.coincidence_fraction),
            "no_click_fraction": float(self.no_click_fraction),
            "mean_steps_to_click": None if np.isnan(self.mean_steps_to_click) else float(self.mean_steps_to_click),
        }


def run_threshold_trials(spec: FieldSpec, cfg: DetectorConfig, n_trials: int, seed: int) -> DetectionStats:
    """Race ``n_trials`` independent trials of the threshold detector.

    Each step draws a full batch of field samples and per-channel background
    noise regardless of which trials are still running, so the random stream
    consumed at step t does not depend on the threshold; sweeps over
    thresholds with the same seed therefore see common randomness.
    Results are bit-reproducible for identical (spec, cfg, n_trials, seed).
    """
    if n_trials < 1:
        raise ValueError("n_trials must be positive")
    basis = cfg.resolve_basis(spec.dim)
    k = basis.shape[1]
    rng = substream(seed)
    noise_scale = np.sqrt(cfg.background_kappa / 2.0)

    acc = np.zeros((n_trials, k))
    winner = np.zeros((n_trials, k), dtype=bool)
    open_trial = np.ones(n_trials, dtype=bool)
    click_step = np.zeros(n_trials, dtype=np.int64)
    for step in range(1, cfg.max_steps + 1):
        phi = draw_samples(spec, rng, n_trials)
        noise_re = rng.standard_normal((n_trials, k))
        noise_im = rng.standard_normal((n_trials, k))
        amps = phi @ basis.conj() + (noise_re + 1j * noise_im) * noise_scale
        acc += cfg.dt * np.abs(amps) ** 2
        crossed = (acc >= cfg.threshold) & open_trial[:, None]
        fired = crossed.any(axis=1)
        winner[fired] = crossed[fired]
        click_step[fired] = step
        open_trial &= ~fired
        if not open_trial.any():
            break

    crossings = winner.sum(axis=0).astype(np.int64)
    per_trial = winner.sum(axis=1)
    singles_mask = per_trial == 1
    clicks = winner[singles_mask].sum(axis=0).astype(np.int64)
    coincidences = int((per_trial >= 2).sum())
    no_click = int(open_trial.sum())
    pair = (winner.astype(np.int64).T @ winner.astype(np.int64))
    np.fill_diagonal(pair, 0)
    clicked = click_step > 0
    mean_steps = float(click_step[clicked].mean()) if clicked.any() else float("nan")
    return DetectionStats(
        trials=n_trials,
        threshold=cfg.threshold,
        clicks_per_channel=clicks,
        coincidences=coincidences,
        no_click_trials=no_click,
        crossings_per_channel=crossings,
        pair_coincidences=pair,
        seed=int(seed),
        mean_steps_to_click=mean_steps,
    )


def g2_zero(stats: DetectionStats, channel_pair: tuple[int, int] = (0, 1)) -> float:
    """Second-order coherence at zero delay from per-trial crossing indicators.

    g2 = P(both channels cross in the same trial window) divided by the
    product of the marginal crossing probabilities. Zero marginals leave the
    ratio undefined and raise :class:`UndefinedG2Error`.
    """
    k, m = channel_pair
    if k == m:
        raise ValueError("g2 needs two distinct channels")
    if stats.trials < 1:
        raise UndefinedG2Error("no trials recorded")
    p_k = stats.crossings_per_channel[k] / stats.trials
    p_m = stats.crossings_per_channel[m] / stats.trials
    if p_k == 0.0 or p_m == 0.0:
        raise UndefinedG2Error(f"channel marginals ({p_k}, {p_m}) include zero; g2 undefined")
    p_both = stats.pair_coincidences[k, m] / stats.trials
    return float(p_both / (p_k * p_m))
