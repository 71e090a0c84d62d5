"""Superposition as maximal correlation between component signals.

A sum of one-dimensional component signals is itself one-dimensional exactly
when every pair of components has correlation of modulus one. The
common-driver construction here achieves that equality case: all components
are scalar multiples of a single Gaussian driver, so the covariance in the
component basis factorizes as sigma^2 c_k conj(c_m) and is rank one.
Decoherence is modeled as the destruction of those cross-correlations by
independent per-component phase noise, which leaves every component's energy
untouched sample-by-sample.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linops
from .fieldsim import (
    FieldEnsemble,
    FieldSpec,
    SumFieldSpec,
    SuperpositionFieldSpec,
    require_orthonormal_columns,
    sample_field,
)
from .onticmap import ZeroFieldError
from .rng import substream


@dataclass(frozen=True)
class ComponentSignals:
    """Per-sample component values xi[i, k] = <e_k|phi_i> in an orthonormal basis."""

    basis: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        b = require_orthonormal_columns(self.basis)
        x = np.asarray(self.xi, dtype=np.complex128)
        if x.ndim != 2 or x.shape[1] != b.shape[1]:
            raise ValueError(f"xi must be (n, {b.shape[1]}), got {x.shape}")
        b = b.copy()
        b.setflags(write=False)
        x = x.copy() if x.flags.writeable else x
        x.setflags(write=False)
        object.__setattr__(self, "basis", b)
        object.__setattr__(self, "xi", x)

    @property
    def n(self) -> int:
        return self.xi.shape[0]

    @property
    def n_components(self) -> int:
        return self.xi.shape[1]

    def reconstruct(self) -> np.ndarray:
        """Reassemble field samples sum_k xi_k e_k."""
        return self.xi @ self.basis.T


def component_signals(samples, basis) -> ComponentSignals:
    """Split field samples into component signals along orthonormal basis columns."""
    x = samples.samples if isinstance(samples, FieldEnsemble) else np.asarray(samples, dtype=np.complex128)
    b = require_orthonormal_columns(basis)
    return ComponentSignals(basis=b, xi=x @ b.conj())


def superpose_max_correlated(
    spec: SuperpositionFieldSpec, n: int, seed: int
) -> tuple[FieldEnsemble, ComponentSignals]:
    """Generate the common-driver ensemble together with its component signals.

    The ensemble is bit-identical to ``sample_field(spec, n, seed)``; the
    component values are xi_k = c_k eta for the same driver draw, so their
    pairwise correlations all have modulus one.
    """
    ensemble = sample_field(spec, n, seed)
    cs = component_signals(ensemble.samples, spec.basis)
    return ensemble, cs


def correlation_matrix(cs: ComponentSignals) -> np.ndarray:
    """Pairwise correlations sigma_km / (sigma_k sigma_m) with zero-mean moments.

    Entry (k, m) uses E xi_k conj(xi_m), so a component lagging by phase
    theta shows up with phase -theta. Components with zero empirical variance
    make their entries undefined; those are flagged as NaN. Defined diagonal
    entries are exactly 1.
    """
    x = cs.xi
    n = x.shape[0]
    second = x.T @ x.conj() / n
    sigma = np.sqrt(np.diag(second).real)
    cor = np.full(second.shape, np.nan + 1j * np.nan, dtype=np.complex128)
    defined = sigma > 0.0
    idx = np.where(defined)[0]
    if idx.size:
        block = second[np.ix_(idx, idx)] / np.outer(sigma[idx], sigma[idx])
        cor[np.ix_(idx, idx)] = block
        cor[idx, idx] = 1.0
    return cor


@dataclass(frozen=True)
class RankOneResult:
    is_rank_one: bool
    psi_hat: np.ndarray
    top_eigenvalue: float
    eigenvalue_ratio: float


def rank_one_check(covariance, tol: float = 1e-10) -> RankOneResult:
    """Decide whether a PSD covariance is rank one within ``tol``.

    The criterion is lambda_2 / lambda_1 <= tol. ``psi_hat`` is the top
    eigenvector with its first significant component made real nonnegative,
    the canonical representative of the (phase-invariant) line it spans.
    Statistical covariances estimated from ~1e5 samples warrant tol around
    0.02; analytic covariances should pass at the default.
    """
    evals, evecs = linops.hermitian_eig(covariance)
    trace = float(evals.sum())
    if trace <= 1e-12:
        raise ZeroFieldError("covariance trace is not positive; rank test undefined for the zero field")
    ratio = float(evals[1] / evals[0]) if evals.size > 1 else 0.0
    return RankOneResult(
        is_rank_one=ratio <= tol,
        psi_hat=evecs[:, 0],
        top_eigenvalue=float(evals[0]),
        eigenvalue_ratio=ratio,
    )


def decohere(cs: ComponentSignals, gamma: float, seed: int) -> ComponentSignals:
    """Apply independent Gaussian phase noise of variance ``gamma`` per component.

    Each xi_k picks up a factor exp(i theta) with theta ~ N(0, gamma) drawn
    independently per sample and component, so every pairwise cross-
    correlation shrinks by exp(-gamma) in expectation while |xi_k| is
    preserved. gamma = 0 returns the input values unchanged.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    rng = substream(seed)
    theta = rng.standard_normal(cs.xi.shape) * np.sqrt(gamma)
    return ComponentSignals(basis=cs.basis, xi=cs.xi * np.exp(1j * theta))


def superpose_fields(
    spec_a: FieldSpec, spec_b: FieldSpec, coupling: str, n: int, seed: int
) -> FieldEnsemble:
    """Sample the pointwise sum of two fields under the given coupling.

    ``"independent"`` adds covariances; ``"common_driver"`` feeds both
    (necessarily one-dimensional) parts from a single scalar driver so that
    the coordinate sums are maximally correlated and the result is again
    one-dimensional.
    """
    return sample_field(SumFieldSpec(part_a=spec_a, part_b=spec_b, coupling=coupling), n, seed)


def correlation_to_json(cor: np.ndarray) -> dict:
    """JSON form of a correlation matrix; undefined (NaN) entries become null."""
    def cell(value: complex):
        if np.isnan(value.real) or np.isnan(value.imag):
            return None
        return [float(value.real), float(value.imag)]

    return {
        "n_components": int(cor.shape[0]),
        "entries": [[cell(v) for v in row] for row in cor],
    }


def write_components_csv(cs: ComponentSignals, path) -> None:
    """Export component signals: basis rows first, then per-sample values.

    Layout mirrors the ensemble export (interleaved re/im doubles); the
    basis block has one row per Hilbert-space dimension.
    """
    dim, k = cs.basis.shape
    with open(path, "w") as fh:
        fh.write("n,n_components,dim\n")
        fh.write(f"{cs.n},{k},{dim}\n")
        fh.write("basis\n")
        for row in cs.basis:
            fh.write(",".join(f"{float(v.real)!r},{float(v.imag)!r}" for v in row) + "\n")
        fh.write("xi\n")
        for row in cs.xi:
            fh.write(",".join(f"{float(v.real)!r},{float(v.imag)!r}" for v in row) + "\n")


def read_components_csv(path) -> ComponentSignals:
    with open(path) as fh:
        fh.readline()
        n, k, dim = (int(tok) for tok in fh.readline().strip().split(","))
        if fh.readline().strip() != "basis":
            raise ValueError("component file is missing its basis block")
        rows = [[float(tok) for tok in fh.readline().split(",")] for _ in range(dim)]
        basis_flat = np.array(rows)
        if fh.readline().strip() != "xi":
            raise ValueError("component file is missing its xi block")
        data = [[float(tok) for tok in fh.readline().split(",")] for _ in range(n)]
    basis = basis_flat[:, 0::2] + 1j * basis_flat[:, 1::2]
    flat = np.array(data)
    xi = flat[:, 0::2] + 1j * flat[:, 1::2]
    if basis.shape != (dim, k) or xi.shape != (n, k):
        raise ValueError("component file is inconsistent with its header")
    return ComponentSignals(basis=basis, xi=xi)
