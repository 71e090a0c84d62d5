"""Generation and statistics of zero-mean complex random field ensembles.

A field sample is a vector in C^dim; an ensemble is a stack of independent
samples drawn per a generative :data:`FieldSpec`. The Gaussian convention is
circularly symmetric throughout: a field with covariance B is produced as
B^{1/2} z where z has independent real and imaginary parts of variance 1/2
per coordinate, so E[phi phi†] = B and E[phi phi^T] = 0. Under that
convention the covariance determines the Gaussian field uniquely.

Reproducibility contract: identical (spec, seed, n) regenerate samples
bit-identically. Each sampler documents its draw order and never consumes
randomness conditionally.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import linops
from .rng import substream


def _standard_basis(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=np.complex128)


def require_orthonormal_columns(basis, dim: int | None = None, tol: float = 1e-9) -> np.ndarray:
    """Validate a (dim, k) matrix of orthonormal basis columns.

    When ``dim`` is given the basis must also be complete (k == dim).
    """
    b = np.asarray(basis, dtype=np.complex128)
    if b.ndim == 1:
        b = b[:, None]
    if b.ndim != 2:
        raise ValueError(f"basis must be a (dim, k) array, got shape {b.shape}")
    gram = b.conj().T @ b
    defect = float(np.linalg.norm(gram - np.eye(b.shape[1])))
    if defect > tol:
        raise ValueError(f"basis columns are not orthonormal (Gram defect {defect:.3e})")
    if dim is not None and b.shape != (dim, dim):
        raise ValueError(f"need a complete orthonormal basis of dimension {dim}, got shape {b.shape}")
    return b


@dataclass(frozen=True)
class GaussianFieldSpec:
    """Circular complex Gaussian field with prescribed PSD covariance."""

    covariance: np.ndarray

    def __post_init__(self):
        b = linops.require_hermitian(self.covariance)
        evals = np.linalg.eigvalsh((b + b.conj().T) / 2)
        if evals.min() < -linops.DEFAULT_TOL_PSD:
            raise linops.NotPositiveSemidefiniteError(
                f"covariance has eigenvalue {evals.min():.3e}; not PSD"
            )
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "covariance", b)

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]


@dataclass(frozen=True)
class PureFieldSpec:
    """Field concentrated on the line spanned by ``psi``: xi(omega) psi/|psi|.

    The scalar xi is circular complex Gaussian with variance ``sigma2``, so
    the covariance is exactly sigma2 times the projector onto psi.
    """

    psi: np.ndarray
    sigma2: float

    def __post_init__(self):
        v = linops.as_vector(self.psi)
        if np.linalg.norm(v) == 0.0:
            raise ValueError("psi must be nonzero")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "psi", v)
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def dim(self) -> int:
        return self.psi.size

    @property
    def unit_vector(self) -> np.ndarray:
        return self.psi / np.linalg.norm(self.psi)


@dataclass(frozen=True)
class SuperpositionFieldSpec:
    """Sum of one-dimensional component signals sharing a single scalar driver.

    Component k is coefficients[k] * eta(omega) along basis column k, where
    eta is circular complex Gaussian with variance ``driver_sigma2``. All
    pairwise component correlations then have modulus one, and the analytic
    covariance is driver_sigma2 * |c><c| expressed in the chosen basis.
    """

    coefficients: np.ndarray
    driver_sigma2: float = 1.0
    basis: np.ndarray | None = None

    def __post_init__(self):
        c = linops.as_vector(self.coefficients)
        if np.linalg.norm(c) == 0.0:
            raise ValueError("at least one coefficient must be nonzero")
        if not self.driver_sigma2 > 0:
            raise ValueError("driver_sigma2 must be positive")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "driver_sigma2", float(self.driver_sigma2))
        if self.basis is None:
            b = _standard_basis(c.size)
        else:
            b = require_orthonormal_columns(self.basis)
            if b.shape[1] != c.size:
                raise ValueError("need one basis column per coefficient")
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def state_vector(self) -> np.ndarray:
        """The (unnormalized) superposition vector sum_k c_k e_k."""
        return self.basis @ self.coefficients


@dataclass(frozen=True)
class DecoheredFieldSpec:
    """Inner field with per-component Gaussian phase noise of variance ``gamma``.

    Phases are independent across samples and components, so pairwise
    component correlations shrink by exp(-gamma) while per-component energies
    are untouched. Noise acts in the inner spec's construction basis (the
    superposition basis when there is one, the standard basis otherwise).
    """

    inner: "FieldSpec"
    gamma: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def dim(self) -> int:
        return self.inner.dim


@dataclass(frozen=True)
class SumFieldSpec:
    """Pointwise sum of two fields, either independent or sharing one driver.

    With ``coupling="independent"`` the parts are sampled from disjoint draws
    and covariances add. With ``coupling="common_driver"`` both parts must be
    one-dimensional (pure or superposition) and are driven by a single unit
    scalar Gaussian, which makes the summed field one-dimensional again.
    """

    part_a: "FieldSpec"
    part_b: "FieldSpec"
    coupling: str = "independent"

    def __post_init__(self):
        if self.coupling not in ("independent", "common_driver"):
            raise ValueError(f"unknown coupling {self.coupling!r}")
        if self.part_a.dim != self.part_b.dim:
            raise ValueError(f"dimension mismatch: {self.part_a.dim} vs {self.part_b.dim}")
        if self.coupling == "common_driver":
            rank_one_direction(self.part_a)
            rank_one_direction(self.part_b)

    @property
    def dim(self) -> int:
        return self.part_a.dim


FieldSpec = Union[
    GaussianFieldSpec, PureFieldSpec, SuperpositionFieldSpec, DecoheredFieldSpec, SumFieldSpec
]


def rank_one_direction(spec: FieldSpec) -> np.ndarray:
    """Scaled direction v with covariance |v><v| for a one-dimensional spec."""
    if isinstance(spec, PureFieldSpec):
        return np.sqrt(spec.sigma2) * spec.unit_vector
    if isinstance(spec, SuperpositionFieldSpec):
        return np.sqrt(spec.driver_sigma2) * spec.state_vector
    raise ValueError(f"{type(spec).__name__} does not describe a one-dimensional field")


def component_basis(spec: FieldSpec) -> np.ndarray:
    """The basis in which a spec's component signals are naturally expressed."""
    if isinstance(spec, SuperpositionFieldSpec):
        return spec.basis
    if isinstance(spec, DecoheredFieldSpec):
        return component_basis(spec.inner)
    return _standard_basis(spec.dim)


def analytic_covariance(spec: FieldSpec) -> np.ndarray:
    """Exact covariance operator of the field described by ``spec``."""
    if isinstance(spec, GaussianFieldSpec):
        return np.array(spec.covariance)
    if isinstance(spec, PureFieldSpec):
        return spec.sigma2 * linops.make_projector(spec.unit_vector)
    if isinstance(spec, SuperpositionFieldSpec):
        return spec.driver_sigma2 * linops.make_projector(spec.state_vector)
    if isinstance(spec, DecoheredFieldSpec):
        inner = analytic_covariance(spec.inner)
        basis = component_basis(spec.inner)
        comp = basis.conj().T @ inner @ basis
        damp = np.full_like(comp, np.exp(-spec.gamma))
        np.fill_diagonal(damp, 1.0)
        outside = inner - basis @ comp @ basis.conj().T
        return outside + basis @ (comp * damp) @ basis.conj().T
    if isinstance(spec, SumFieldSpec):
        if spec.coupling == "independent":
            return analytic_covariance(spec.part_a) + analytic_covariance(spec.part_b)
        v = rank_one_direction(spec.part_a) + rank_one_direction(spec.part_b)
        if np.linalg.norm(v) == 0.0:
            return np.zeros((spec.dim, spec.dim), dtype=np.complex128)
        return linops.make_projector(v)
    raise TypeError(f"unknown field spec type {type(spec).__name__}")


def spec_to_dict(spec: FieldSpec) -> dict:
    """Plain-dict form of a spec, canonical enough to hash and serialize."""
    if isinstance(spec, GaussianFieldSpec):
        return {"kind": "gaussian", "covariance": linops.matrix_to_json(spec.covariance)}
    if isinstance(spec, PureFieldSpec):
        return {"kind": "pure", "psi": linops.vector_to_json(spec.psi), "sigma2": spec.sigma2}
    if isinstance(spec, SuperpositionFieldSpec):
        return {
            "kind": "superposition",
            "coefficients": linops.vector_to_json(spec.coefficients),
            "driver_sigma2": spec.driver_sigma2,
            "basis": linops.matrix_to_json(spec.basis),
        }
    if isinstance(spec, DecoheredFieldSpec):
        return {"kind": "decohered", "inner": spec_to_dict(spec.inner), "gamma": spec.gamma}
    if isinstance(spec, SumFieldSpec):
        return {
            "kind": "sum",
            "part_a": spec_to_dict(spec.part_a),
            "part_b": spec_to_dict(spec.part_b),
            "coupling": spec.coupling,
        }
    raise TypeError(f"unknown field spec type {type(spec).__name__}")


def spec_digest(spec: FieldSpec) -> str:
    payload = json.dumps(spec_to_dict(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class FieldEnsemble:
    """n field samples (rows) plus the generation recipe that produced them."""

    spec: FieldSpec
    seed: int
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.complex128)
        if s.ndim != 2 or s.shape[1] != self.spec.dim:
            raise ValueError(f"samples must be (n, {self.spec.dim}), got {s.shape}")
        s = s.copy() if s.flags.writeable else s
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.spec.dim


@dataclass(frozen=True)
class EnsembleStats:
    mean: np.ndarray
    covariance: np.ndarray
    dispersion: float

    def to_json(self) -> dict:
        return {
            "mean": linops.vector_to_json(self.mean),
            "covariance": linops.matrix_to_json(self.covariance),
            "dispersion": float(self.dispersion),
        }


def _complex_normal(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    """Circular complex Gaussian draws; real parts first, then imaginary."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) * np.sqrt(variance / 2.0)


def draw_samples(spec: FieldSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw n samples from ``spec`` using ``rng``; the workhorse behind all samplers."""
    if n < 1:
        raise ValueError("n must be positive")
    if isinstance(spec, GaussianFieldSpec):
        root = linops.psd_sqrt(spec.covariance)
        z = _complex_normal(rng, (n, spec.dim), 1.0)
        return z @ root.T
    if isinstance(spec, PureFieldSpec):
        xi = _complex_normal(rng, n, spec.sigma2)
        return np.outer(xi, spec.unit_vector)
    if isinstance(spec, SuperpositionFieldSpec):
        eta = _complex_normal(rng, n, spec.driver_sigma2)
        return np.outer(eta, spec.state_vector)
    if isinstance(spec, DecoheredFieldSpec):
        inner = draw_samples(spec.inner, rng, n)
        basis = component_basis(spec.inner)
        theta = rng.standard_normal((n, basis.shape[1])) * np.sqrt(spec.gamma)
        phases = np.exp(1j * theta)
        if basis.shape[0] == basis.shape[1] and np.array_equal(basis, _standard_basis(basis.shape[0])):
            return inner * phases
        components = inner @ basis.conj()
        return inner + (components * phases - components) @ basis.T
    if isinstance(spec, SumFieldSpec):
        if spec.coupling == "independent":
            part_a = draw_samples(spec.part_a, rng, n)
            part_b = draw_samples(spec.part_b, rng, n)
            return part_a + part_b
        v = rank_one_direction(spec.part_a) + rank_one_direction(spec.part_b)
        eta = _complex_normal(rng, n, 1.0)
        return np.outer(eta, v)
    raise TypeError(f"unknown field spec type {type(spec).__name__}")


def sample_field(spec: FieldSpec, n: int, seed: int) -> FieldEnsemble:
    """Generate a reproducible ensemble: same (spec, seed, n) -> same bits."""
    rng = substream(seed)
    return FieldEnsemble(spec=spec, seed=int(seed), samples=draw_samples(spec, rng, n))


def sample_gaussian_field(covariance, n: int, seed: int) -> FieldEnsemble:
    """Gaussian ensemble with E[phi phi†] = covariance (must be PSD Hermitian)."""
    return sample_field(GaussianFieldSpec(covariance=np.asarray(covariance)), n, seed)


def sample_pure_field(psi, sigma2: float, n: int, seed: int) -> FieldEnsemble:
    """Ensemble concentrated on the line spanned by psi with dispersion sigma2."""
    return sample_field(PureFieldSpec(psi=np.asarray(psi), sigma2=sigma2), n, seed)


def ensemble_stats(ensemble: FieldEnsemble | np.ndarray) -> EnsembleStats:
    """Zero-mean empirical statistics: mean, covariance (1/n) sum phi phi†, dispersion.

    The estimator intentionally does not subtract the sample mean: the model
    class fixes zero mean, and the raw second moment keeps the identity
    dispersion == trace(covariance) exact by construction.
    """
    x = ensemble.samples if isinstance(ensemble, FieldEnsemble) else np.asarray(ensemble, dtype=np.complex128)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("need at least one sample")
    n = x.shape[0]
    cov = x.T @ x.conj() / n
    cov = (cov + cov.conj().T) / 2
    return EnsembleStats(
        mean=x.mean(axis=0),
        covariance=cov,
        dispersion=float(np.trace(cov).real),
    )


def total_energy(phi) -> float:
    """Squared norm |phi|^2: the total energy carried by one field sample."""
    v = linops.as_vector(phi)
    return float(np.vdot(v, v).real)


def energy_along(ensemble: FieldEnsemble | np.ndarray, direction) -> float:
    """Average energy along a unit direction: (1/n) sum |<phi_i|e>|^2.

    Converges to <e|B|e> for the generating covariance B.
    """
    x = ensemble.samples if isinstance(ensemble, FieldEnsemble) else np.asarray(ensemble, dtype=np.complex128)
    e = linops.as_vector(direction)
    if abs(np.linalg.norm(e) - 1.0) > 1e-9:
        raise ValueError("direction must be normalized")
    if e.size != x.shape[1]:
        raise ValueError("direction dimension does not match samples")
    amps = x @ e.conj()
    return float(np.mean(np.abs(amps) ** 2))


def energy_density(phi, dx: float) -> np.ndarray:
    """Pointwise energy |phi(x_i)|^2 of a field on a 1-D grid with spacing dx.

    The grid-weighted total energy is sum(density) * dx. Only the positivity
    of dx matters for the density itself; it is validated here because the
    quantity is meaningless without a grid scale.
    """
    v = linops.as_vector(phi)
    if not dx > 0:
        raise ValueError("dx must be positive")
    return np.abs(v) ** 2


def write_ensemble_csv(ensemble: FieldEnsemble, path) -> None:
    """Columnar CSV export: metadata header, then interleaved re/im doubles."""
    x = ensemble.samples
    dim = x.shape[1]
    cols = ",".join(f"re_{j},im_{j}" for j in range(dim))
    with open(path, "w") as fh:
        fh.write("dim,n,seed,spec_digest\n")
        fh.write(f"{dim},{x.shape[0]},{ensemble.seed},{spec_digest(ensemble.spec)}\n")
        fh.write(cols + "\n")
        for row in x:
            fh.write(",".join(f"{float(c.real)!r},{float(c.imag)!r}" for c in row) + "\n")


def read_ensemble_csv(path) -> tuple[dict, np.ndarray]:
    """Read back an exported ensemble; returns (metadata, samples)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        values = fh.readline().strip().split(",")
        meta = dict(zip(header, values))
        fh.readline()
        rows = [[float(tok) for tok in line.split(",")] for line in fh if line.strip()]
    dim = int(meta["dim"])
    meta["n"] = int(meta["n"])
    meta["dim"] = dim
    meta["seed"] = int(meta["seed"])
    flat = np.vstack(rows)
    samples = flat[:, 0::2] + 1j * flat[:, 1::2]
    if samples.shape != (meta["n"], dim):
        raise ValueError("ensemble file is inconsistent with its header")
    return meta, samples
