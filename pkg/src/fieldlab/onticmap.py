"""The covariance-to-state correspondence and its inverse family.

A random field's covariance operator B, normalized by the field's average
total energy sigma^2 = Tr B, is a density operator rho = B / Tr B. The map
is many-to-one: fields differing only by energy scale share the same rho,
which is what :func:`equivalent` decides. :func:`born_probabilities` reads
out channel probabilities <e_k|rho|e_k> in an orthonormal basis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linops
from .fieldsim import require_orthonormal_columns

# Traces at or below this are treated as the (undefined) zero-field case.
ZERO_TRACE_TOL = 1e-12

PROB_CLAMP_TOL = 1e-9


class ZeroFieldError(ValueError):
    """Raised when an operation requires a field with positive average energy."""


@dataclass(frozen=True)
class EpistemicImage:
    """Density operator plus the energy scale that was divided out."""

    rho: np.ndarray
    sigma2: float

    def to_json(self) -> dict:
        return {"rho": linops.matrix_to_json(self.rho), "sigma2": float(self.sigma2)}


def to_epistemic(covariance, tol_herm: float = linops.DEFAULT_TOL_HERM) -> EpistemicImage:
    """Normalize a PSD Hermitian covariance into (rho, sigma2) with rho = B/Tr B."""
    b = linops.require_hermitian(covariance, tol_herm)
    trace = float(np.trace(b).real)
    if trace <= ZERO_TRACE_TOL:
        raise ZeroFieldError(f"trace {trace:.3e} is not positive; the zero field has no state image")
    check = linops.is_density(b / trace, tol_herm=tol_herm)
    if not check.psd:
        raise linops.NotPositiveSemidefiniteError(
            f"covariance is not PSD: min eigenvalue {check.min_eigenvalue * trace:.3e}"
        )
    return EpistemicImage(rho=b / trace, sigma2=trace)


def from_epistemic(rho, sigma2: float) -> np.ndarray:
    """Reconstruct the covariance sigma2 * rho of the energy-sigma2 preimage field."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    check = linops.is_density(rho)
    if not check:
        raise ValueError("rho is not a density operator: " + "; ".join(check.failures()))
    return float(sigma2) * linops.as_matrix(rho)


def born_probabilities(rho, basis=None, tol: float = PROB_CLAMP_TOL) -> np.ndarray:
    """Channel probabilities p_k = <e_k|rho|e_k> for a complete orthonormal basis.

    Values in [-tol, 0) coming from numerical noise are clamped to zero and
    the vector is renormalized so downstream samplers always receive a valid
    distribution.
    """
    r = linops.as_matrix(rho)
    check = linops.is_density(r)
    if not check:
        raise ValueError("rho is not a density operator: " + "; ".join(check.failures()))
    dim = r.shape[0]
    e = np.eye(dim, dtype=np.complex128) if basis is None else require_orthonormal_columns(basis, dim=dim)
    probs = np.einsum("ik,ij,jk->k", e.conj(), r, e).real
    if probs.min() < -tol:
        raise ValueError(f"probability {probs.min():.3e} below clamp tolerance; rho is invalid")
    total = probs.sum()
    if abs(total - 1.0) > tol:
        raise ValueError(f"probabilities sum to {total:.12f}, not 1")
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def equivalent(cov_a, cov_b, tol: float = 1e-9) -> bool:
    """Whether two covariances describe the same state up to energy scale."""
    image_a = to_epistemic(cov_a)
    image_b = to_epistemic(cov_b)
    return linops.frobenius_distance(image_a.rho, image_b.rho) <= tol
