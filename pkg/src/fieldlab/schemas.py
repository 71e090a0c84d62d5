"""Pydantic models shared by config files, the HTTP service, and the CLI.

Complex entries in field specs are written as plain numbers (real) or
``[re, im]`` pairs; matrices are nested lists of such entries, with basis
matrices given as a list of basis vectors (rows in the file become basis
columns). Operator endpoints use the strict ``{dim, re, im}`` wire format,
which round-trips doubles exactly. All models reject unknown keys.
"""
from __future__ import annotations

import hashlib
import json
from typing import Annotated, Any, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from . import fieldsim, linops

Entry = Union[float, int, list[float]]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


def to_complex(value: Entry) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ValueError(f"expected a number or [re, im] pair, got {value!r}")


def to_vector(entries: list[Entry]) -> np.ndarray:
    return np.array([to_complex(v) for v in entries], dtype=np.complex128)


def to_matrix(rows: list[list[Entry]]) -> np.ndarray:
    mat = np.array([[to_complex(v) for v in row] for row in rows], dtype=np.complex128)
    if mat.ndim != 2:
        raise ValueError("matrix rows have inconsistent lengths")
    return mat


class MatrixWire(StrictModel):
    """Exact wire format for operators: row-major re/im coefficient lists."""

    dim: int = Field(ge=1)
    re: list[float]
    im: list[float]

    @model_validator(mode="after")
    def _check_lengths(self):
        if len(self.re) != self.dim * self.dim or len(self.im) != self.dim * self.dim:
            raise ValueError(f"matrix wire payload needs {self.dim * self.dim} re/im entries")
        return self

    @classmethod
    def from_array(cls, m) -> "MatrixWire":
        return cls(**linops.matrix_to_json(m))

    def to_array(self) -> np.ndarray:
        return linops.matrix_from_json(self.model_dump())


class VectorWire(StrictModel):
    dim: int = Field(ge=1)
    re: list[float]
    im: list[float]

    @model_validator(mode="after")
    def _check_lengths(self):
        if len(self.re) != self.dim or len(self.im) != self.dim:
            raise ValueError(f"vector wire payload needs {self.dim} re/im entries")
        return self

    @classmethod
    def from_array(cls, v) -> "VectorWire":
        return cls(**linops.vector_to_json(v))

    def to_array(self) -> np.ndarray:
        return linops.vector_from_json(self.model_dump())


class GaussianSpecModel(StrictModel):
    kind: Literal["gaussian"] = "gaussian"
    covariance: list[list[Entry]]


class PureSpecModel(StrictModel):
    kind: Literal["pure"] = "pure"
    psi: list[Entry]
    sigma2: float = Field(default=1.0, gt=0)


class SuperpositionSpecModel(StrictModel):
    kind: Literal["superposition"] = "superposition"
    coefficients: list[Entry]
    driver_sigma2: float = Field(default=1.0, gt=0)
    basis: list[list[Entry]] | None = None


class DecoheredSpecModel(StrictModel):
    kind: Literal["decohered"] = "decohered"
    inner: "FieldSpecModel"
    gamma: float = Field(ge=0)


class SumSpecModel(StrictModel):
    kind: Literal["sum"] = "sum"
    part_a: "FieldSpecModel"
    part_b: "FieldSpecModel"
    coupling: Literal["independent", "common_driver"] = "independent"


FieldSpecModel = Annotated[
    Union[GaussianSpecModel, PureSpecModel, SuperpositionSpecModel, DecoheredSpecModel, SumSpecModel],
    Field(discriminator="kind"),
]

DecoheredSpecModel.model_rebuild()
SumSpecModel.model_rebuild()


def build_field_spec(model: FieldSpecModel) -> fieldsim.FieldSpec:
    """Materialize a config model into the sampling dataclass it describes."""
    if isinstance(model, GaussianSpecModel):
        return fieldsim.GaussianFieldSpec(covariance=to_matrix(model.covariance))
    if isinstance(model, PureSpecModel):
        return fieldsim.PureFieldSpec(psi=to_vector(model.psi), sigma2=model.sigma2)
    if isinstance(model, SuperpositionSpecModel):
        basis = None if model.basis is None else to_matrix(model.basis).T
        return fieldsim.SuperpositionFieldSpec(
            coefficients=to_vector(model.coefficients),
            driver_sigma2=model.driver_sigma2,
            basis=basis,
        )
    if isinstance(model, DecoheredSpecModel):
        return fieldsim.DecoheredFieldSpec(inner=build_field_spec(model.inner), gamma=model.gamma)
    if isinstance(model, SumSpecModel):
        return fieldsim.SumFieldSpec(
            part_a=build_field_spec(model.part_a),
            part_b=build_field_spec(model.part_b),
            coupling=model.coupling,
        )
    raise TypeError(f"unknown field spec model {type(model).__name__}")


class DetectorSettings(StrictModel):
    threshold_multiples: list[float] = Field(default=[5.0, 10.0, 20.0, 40.0], min_length=1)
    kappa: float = Field(default=0.1, ge=0)
    max_steps: int = Field(default=600, ge=1)
    dt: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def _positive_multiples(self):
        if any(m <= 0 for m in self.threshold_multiples):
            raise ValueError("threshold multiples must be positive")
        return self


class ToleranceSettings(StrictModel):
    """Every verdict below is judged against these fields and nothing else."""

    covariance_frobenius: float = 0.05
    born_identity: float = 1e-12
    born_abs: float = 0.01
    support_leak: float = 1e-24
    rank_one_ratio: float = 0.02
    rank_one_strict: float = 0.01
    correlation_min: float = 0.99
    anticorrelation_rel: float = 0.02
    decoherence_abs: float = 0.03
    coincidence_max: float = 0.01
    seed_pass_fraction: float = 0.95
    symmetry_sigmas: float = 3.0


ExperimentName = Literal["born", "purestate", "superposition", "decoherence", "detection_sweep"]

_SQ2 = 1.0 / np.sqrt(2.0)


def default_field_model(experiment: ExperimentName) -> FieldSpecModel:
    if experiment == "born":
        return GaussianSpecModel(covariance=[[1.0, 0.0], [0.0, 3.0]])
    if experiment == "purestate":
        return PureSpecModel(psi=[1.0, 0.0], sigma2=1.0)
    if experiment in ("superposition", "decoherence"):
        return SuperpositionSpecModel(coefficients=[_SQ2, _SQ2], driver_sigma2=1.0)
    # detection_sweep: moderately asymmetric one-dimensional signal over a
    # kappa=0.1 background; keeps both channels competitive at the largest
    # threshold while same-step double crossings stay rare
    return SuperpositionSpecModel(coefficients=[0.6, 0.8], driver_sigma2=0.5)


class ExperimentConfig(StrictModel):
    experiment: ExperimentName
    dim: int | None = Field(default=None, ge=1)
    field: FieldSpecModel | None = None
    n_samples: int = Field(default=100_000, ge=1)
    n_trials: int = Field(default=10_000, ge=1)
    seeds: list[int] = Field(default_factory=lambda: list(range(20)), min_length=1)
    gammas: list[float] = Field(default=[0.25, 0.5, 1.0, 2.0], min_length=1)
    detector: DetectorSettings = Field(default_factory=DetectorSettings)
    tolerances: ToleranceSettings = Field(default_factory=ToleranceSettings)
    out_dir: str | None = None

    @model_validator(mode="after")
    def _resolve_and_check(self):
        if self.field is None:
            self.field = default_field_model(self.experiment)
        if self.experiment in ("superposition", "decoherence"):
            if self.field.kind != "superposition":
                raise ValueError(f"the {self.experiment} experiment needs a superposition field spec")
            coeffs = [to_complex(c) for c in self.field.coefficients]
            if len(coeffs) < 2 or coeffs[0] == 0 or coeffs[1] == 0:
                raise ValueError(
                    f"the {self.experiment} experiment measures the (0, 1) component pair; "
                    "both coefficients must be nonzero"
                )
        if self.experiment == "purestate" and self.field.kind != "pure":
            raise ValueError("the purestate experiment needs a pure field spec")
        if any(g < 0 for g in self.gammas):
            raise ValueError("gammas must be nonnegative")
        spec_dim = build_field_spec(self.field).dim
        if self.dim is None:
            self.dim = spec_dim
        elif self.dim != spec_dim:
            raise ValueError(f"declared dim {self.dim} does not match field spec dim {spec_dim}")
        return self

    def field_spec(self) -> fieldsim.FieldSpec:
        return build_field_spec(self.field)

    def digest(self) -> str:
        payload = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


class Verdict(StrictModel):
    name: str
    passed: bool
    detail: str


class Report(StrictModel):
    experiment: str
    config: ExperimentConfig
    config_digest: str
    results: dict[str, Any]
    aggregates: dict[str, Any]
    verdicts: list[Verdict]
    passed: bool
    error: str | None = None
    timings: dict[str, float] = Field(default_factory=dict)
    version: str = "0.1.0"

    def deterministic_dump(self) -> dict:
        """Everything that must be identical across reruns of the same config."""
        payload = self.model_dump(mode="json")
        payload.pop("timings")
        return payload


class SampleStatsRequest(StrictModel):
    field: FieldSpecModel
    n: int = Field(ge=1)
    seed: int = 0


class DetectionRequest(StrictModel):
    field: FieldSpecModel
    threshold: float | None = Field(default=None, gt=0)
    threshold_multiple: float | None = Field(default=None, gt=0)
    kappa: float = Field(default=0.1, ge=0)
    max_steps: int = Field(default=600, ge=1)
    dt: float = Field(default=1.0, gt=0)
    n_trials: int = Field(default=10_000, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def _one_threshold_given(self):
        if (self.threshold is None) == (self.threshold_multiple is None):
            raise ValueError("give exactly one of threshold or threshold_multiple")
        return self


class BornRequest(StrictModel):
    rho: MatrixWire
    basis: MatrixWire | None = None


class EpistemicRequest(StrictModel):
    covariance: MatrixWire


class PreimageRequest(StrictModel):
    rho: MatrixWire
    sigma2: float = Field(gt=0)


class ProjectorRequest(StrictModel):
    psi: VectorWire


class DensityCheckRequest(StrictModel):
    matrix: MatrixWire
    tol_herm: float = linops.DEFAULT_TOL_HERM
    tol_psd: float = linops.DEFAULT_TOL_PSD
    tol_trace: float = linops.DEFAULT_TOL_TRACE
