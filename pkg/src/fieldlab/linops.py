"""Dense complex Hermitian operator algebra.

Projectors, eigendecomposition with deterministic phase fixing, PSD square
roots, density-operator validation, Frobenius distances, and the JSON wire
format for matrices and vectors. Everything operates on plain complex
``numpy`` arrays; dimensions up to a few hundred are the intended scale.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_TOL_HERM = 1e-9
DEFAULT_TOL_PSD = 1e-9
DEFAULT_TOL_TRACE = 1e-9

# Components below this fraction of the largest one are ignored when picking
# the anchor entry for eigenvector phase fixing.
_PHASE_ANCHOR_CUTOFF = 1e-12


class NotPositiveSemidefiniteError(ValueError):
    """Raised when an operator required to be PSD has a genuinely negative eigenvalue."""


def as_matrix(op) -> np.ndarray:
    """Coerce input to a square complex matrix without copying when possible."""
    m = np.asarray(op, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] < 1:
        raise ValueError("matrix dimension must be at least 1")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m


def as_vector(v) -> np.ndarray:
    """Coerce input to a 1-D complex vector."""
    vec = np.asarray(v, dtype=np.complex128)
    if vec.ndim != 1 or vec.size < 1:
        raise ValueError(f"expected a 1-D vector, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValueError("vector entries must be finite")
    return vec


def hermitian_part(op) -> np.ndarray:
    """Return (A + A†)/2, the Hermitian part of ``op``."""
    m = as_matrix(op)
    return (m + m.conj().T) / 2


def hermiticity_defect(op) -> float:
    """Frobenius norm of the anti-Hermitian part of ``op``."""
    m = as_matrix(op)
    return float(np.linalg.norm(m - m.conj().T))


def is_hermitian(op, tol: float = DEFAULT_TOL_HERM) -> bool:
    return hermiticity_defect(op) <= tol


def require_hermitian(op, tol: float = DEFAULT_TOL_HERM) -> np.ndarray:
    m = as_matrix(op)
    defect = float(np.linalg.norm(m - m.conj().T))
    if defect > tol:
        raise ValueError(f"matrix is not Hermitian (defect {defect:.3e} > tol {tol:.3e})")
    return m


def make_projector(psi) -> np.ndarray:
    """Outer product |psi><psi|.

    For a normalized vector this is the rank-1 orthogonal projector onto the
    line spanned by ``psi``; unnormalized input scales the result by |psi|^2.
    """
    v = as_vector(psi)
    if np.linalg.norm(v) == 0.0:
        raise ValueError("cannot build a projector from the zero vector")
    return np.outer(v, v.conj())


@dataclass(frozen=True)
class DensityCheck:
    """Outcome of a density-operator test with per-property diagnostics."""

    ok: bool
    hermitian: bool
    psd: bool
    unit_trace: bool
    trace: complex
    min_eigenvalue: float
    hermiticity_defect: float

    def __bool__(self) -> bool:
        return self.ok

    def failures(self) -> list[str]:
        out = []
        if not self.hermitian:
            out.append(f"not Hermitian (defect {self.hermiticity_defect:.3e})")
        if not self.psd:
            out.append(f"not PSD (min eigenvalue {self.min_eigenvalue:.3e})")
        if not self.unit_trace:
            out.append(f"trace is {self.trace.real:.6g}, not 1")
        return out


def is_density(
    op,
    tol_herm: float = DEFAULT_TOL_HERM,
    tol_psd: float = DEFAULT_TOL_PSD,
    tol_trace: float = DEFAULT_TOL_TRACE,
) -> DensityCheck:
    """Check Hermitian + PSD + unit trace; total on square matrices."""
    m = as_matrix(op)
    defect = float(np.linalg.norm(m - m.conj().T))
    hermitian = defect <= tol_herm
    trace = complex(np.trace(m))
    unit_trace = abs(trace - 1.0) <= tol_trace
    # Eigenvalues of the Hermitian part stay meaningful even if the input
    # narrowly fails the hermiticity test.
    evals = np.linalg.eigvalsh((m + m.conj().T) / 2)
    min_eig = float(evals[0])
    psd = min_eig >= -tol_psd
    return DensityCheck(
        ok=hermitian and psd and unit_trace,
        hermitian=hermitian,
        psd=psd,
        unit_trace=unit_trace,
        trace=trace,
        min_eigenvalue=min_eig,
        hermiticity_defect=defect,
    )


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so its first significant component is real >= 0."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        mags = np.abs(col)
        top = mags.max()
        if top == 0.0:
            continue
        anchor = int(np.argmax(mags > top * _PHASE_ANCHOR_CUTOFF))
        phase = col[anchor] / abs(col[anchor])
        out[:, j] = col / phase
    return out


def hermitian_eig(op, tol_herm: float = DEFAULT_TOL_HERM) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and orthonormal eigenvector columns of a Hermitian matrix.

    Eigenvector phases are fixed so the first significant component of each
    column is real and nonnegative, which makes the output deterministic for
    testing. Reconstruction V diag(w) V† reproduces the input to solver
    precision.
    """
    m = require_hermitian(op, tol_herm)
    evals, evecs = np.linalg.eigh((m + m.conj().T) / 2)
    order = np.argsort(-evals, kind="stable")
    return evals[order].astype(np.float64), _fix_phases(evecs[:, order])


def psd_sqrt(op, tol_psd: float = DEFAULT_TOL_PSD, tol_herm: float = DEFAULT_TOL_HERM) -> np.ndarray:
    """Hermitian PSD square root via eigendecomposition.

    Eigenvalues in [-tol_psd, 0) are treated as sampling noise and clamped to
    zero; anything below -tol_psd raises
    :class:`NotPositiveSemidefiniteError`.
    """
    evals, evecs = hermitian_eig(op, tol_herm)
    if evals.min() < -tol_psd:
        raise NotPositiveSemidefiniteError(
            f"eigenvalue {evals.min():.3e} below -{tol_psd:.1e}; matrix is not PSD"
        )
    clamped = np.clip(evals, 0.0, None)
    root = (evecs * np.sqrt(clamped)) @ evecs.conj().T
    return (root + root.conj().T) / 2


def frobenius_distance(a, b) -> float:
    """Frobenius norm of (a - b); requires matching dimensions."""
    ma = as_matrix(a)
    mb = as_matrix(b)
    if ma.shape != mb.shape:
        raise ValueError(f"dimension mismatch: {ma.shape} vs {mb.shape}")
    return float(np.linalg.norm(ma - mb))


def matrix_to_json(op) -> dict:
    """Serialize a matrix to {dim, re, im} with row-major coefficient lists."""
    m = as_matrix(op)
    return {
        "dim": int(m.shape[0]),
        "re": [float(x) for x in m.real.ravel()],
        "im": [float(x) for x in m.imag.ravel()],
    }


def matrix_from_json(payload: dict) -> np.ndarray:
    dim = int(payload["dim"])
    re = np.asarray(payload["re"], dtype=np.float64)
    im = np.asarray(payload["im"], dtype=np.float64)
    if re.shape != (dim * dim,) or im.shape != (dim * dim,):
        raise ValueError(f"matrix payload needs {dim * dim} re/im entries")
    return (re + 1j * im).reshape(dim, dim)


def vector_to_json(v) -> dict:
    vec = as_vector(v)
    return {
        "dim": int(vec.size),
        "re": [float(x) for x in vec.real],
        "im": [float(x) for x in vec.imag],
    }


def vector_from_json(payload: dict) -> np.ndarray:
    dim = int(payload["dim"])
    re = np.asarray(payload["re"], dtype=np.float64)
    im = np.asarray(payload["im"], dtype=np.float64)
    if re.shape != (dim,) or im.shape != (dim,):
        raise ValueError(f"vector payload needs {dim} re/im entries")
    return re + 1j * im
