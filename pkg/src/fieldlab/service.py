"""HTTP service wrapping the laboratory: operators, field statistics,
threshold detection, and full experiment runs.

Domain errors (non-PSD operators, zero fields, undefined g2, bad bases)
surface as 400 responses; malformed payloads are FastAPI's usual 422.
Experiment runs are synchronous; desk-scale configs answer in seconds.
"""
from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import detect, fieldsim, linops, onticmap
from .experiments import run_experiment
from .schemas import (
    BornRequest,
    DensityCheckRequest,
    DetectionRequest,
    EpistemicRequest,
    ExperimentConfig,
    MatrixWire,
    PreimageRequest,
    ProjectorRequest,
    Report,
    SampleStatsRequest,
    StrictModel,
    VectorWire,
    build_field_spec,
)

app = FastAPI(
    title="fieldlab",
    description="Random-field laboratory: covariance states, superposition correlations, threshold detection.",
    version="0.1.0",
)


@app.exception_handler(ValueError)
async def _domain_error(request: Request, exc: ValueError) -> JSONResponse:
    return JSONResponse(status_code=400, content={"detail": str(exc)})


class HealthResponse(StrictModel):
    status: str
    version: str


class MatrixRequest(StrictModel):
    matrix: MatrixWire


class MatrixResponse(StrictModel):
    matrix: MatrixWire


class DensityCheckResponse(StrictModel):
    ok: bool
    hermitian: bool
    psd: bool
    unit_trace: bool
    trace_real: float
    min_eigenvalue: float
    hermiticity_defect: float
    failures: list[str]


class EpistemicResponse(StrictModel):
    rho: MatrixWire
    sigma2: float


class ProbabilitiesResponse(StrictModel):
    probabilities: list[float]


class StatsResponse(StrictModel):
    mean: VectorWire
    covariance: MatrixWire
    dispersion: float
    spec_digest: str


class DetectionResponse(StrictModel):
    trials: int
    threshold: float
    seed: int
    clicks_per_channel: list[int]
    coincidences: int
    no_click_trials: int
    crossings_per_channel: list[int]
    pair_coincidences: list[list[int]]
    frequencies: list[float]
    coincidence_fraction: float
    no_click_fraction: float
    mean_steps_to_click: float | None
    g2: float | None


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=app.version)


@app.post("/operators/projector", response_model=MatrixResponse)
def projector(req: ProjectorRequest) -> MatrixResponse:
    return MatrixResponse(matrix=MatrixWire.from_array(linops.make_projector(req.psi.to_array())))


@app.post("/operators/density-check", response_model=DensityCheckResponse)
def density_check(req: DensityCheckRequest) -> DensityCheckResponse:
    check = linops.is_density(
        req.matrix.to_array(), tol_herm=req.tol_herm, tol_psd=req.tol_psd, tol_trace=req.tol_trace
    )
    return DensityCheckResponse(
        ok=check.ok,
        hermitian=check.hermitian,
        psd=check.psd,
        unit_trace=check.unit_trace,
        trace_real=check.trace.real,
        min_eigenvalue=check.min_eigenvalue,
        hermiticity_defect=check.hermiticity_defect,
        failures=check.failures(),
    )


@app.post("/operators/psd-sqrt", response_model=MatrixResponse)
def psd_sqrt(req: MatrixRequest) -> MatrixResponse:
    return MatrixResponse(matrix=MatrixWire.from_array(linops.psd_sqrt(req.matrix.to_array())))


@app.post("/map/to-epistemic", response_model=EpistemicResponse)
def to_epistemic(req: EpistemicRequest) -> EpistemicResponse:
    image = onticmap.to_epistemic(req.covariance.to_array())
    return EpistemicResponse(rho=MatrixWire.from_array(image.rho), sigma2=image.sigma2)


@app.post("/map/from-epistemic", response_model=MatrixResponse)
def from_epistemic(req: PreimageRequest) -> MatrixResponse:
    return MatrixResponse(matrix=MatrixWire.from_array(onticmap.from_epistemic(req.rho.to_array(), req.sigma2)))


@app.post("/map/born", response_model=ProbabilitiesResponse)
def born(req: BornRequest) -> ProbabilitiesResponse:
    basis = None if req.basis is None else req.basis.to_array()
    probs = onticmap.born_probabilities(req.rho.to_array(), basis)
    return ProbabilitiesResponse(probabilities=[float(p) for p in probs])


@app.post("/fields/stats", response_model=StatsResponse)
def field_stats(req: SampleStatsRequest) -> StatsResponse:
    spec = build_field_spec(req.field)
    ens = fieldsim.sample_field(spec, req.n, req.seed)
    stats = fieldsim.ensemble_stats(ens)
    return StatsResponse(
        mean=VectorWire.from_array(stats.mean),
        covariance=MatrixWire.from_array(stats.covariance),
        dispersion=stats.dispersion,
        spec_digest=fieldsim.spec_digest(spec),
    )


@app.post("/detect/probs", response_model=ProbabilitiesResponse)
def detection_probs(req: SampleStatsRequest) -> ProbabilitiesResponse:
    spec = build_field_spec(req.field)
    ens = fieldsim.sample_field(spec, req.n, req.seed)
    probs = detect.ensemble_detection_probs(ens)
    return ProbabilitiesResponse(probabilities=[float(p) for p in probs])


@app.post("/detect/run", response_model=DetectionResponse)
def detection_run(req: DetectionRequest) -> DetectionResponse:
    spec = build_field_spec(req.field)
    if req.threshold is not None:
        threshold = req.threshold
    else:
        unit = detect.mean_step_channel_energy(
            spec, detect.DetectorConfig(threshold=1.0, background_kappa=req.kappa, dt=req.dt)
        )
        threshold = req.threshold_multiple * unit
    cfg = detect.DetectorConfig(
        threshold=threshold, background_kappa=req.kappa, max_steps=req.max_steps, dt=req.dt
    )
    stats = detect.run_threshold_trials(spec, cfg, req.n_trials, req.seed)
    try:
        g2 = detect.g2_zero(stats, (0, 1)) if stats.n_channels >= 2 else None
    except detect.UndefinedG2Error:
        g2 = None
    mean_steps = stats.mean_steps_to_click
    return DetectionResponse(
        trials=stats.trials,
        threshold=stats.threshold,
        seed=stats.seed,
        clicks_per_channel=[int(c) for c in stats.clicks_per_channel],
        coincidences=stats.coincidences,
        no_click_trials=stats.no_click_trials,
        crossings_per_channel=[int(c) for c in stats.crossings_per_channel],
        pair_coincidences=[[int(v) for v in row] for row in stats.pair_coincidences],
        frequencies=[float(f) for f in stats.frequencies],
        coincidence_fraction=stats.coincidence_fraction,
        no_click_fraction=stats.no_click_fraction,
        mean_steps_to_click=None if np.isnan(mean_steps) else float(mean_steps),
        g2=g2,
    )


@app.post("/experiments/run", response_model=Report)
def experiments_run(cfg: ExperimentConfig) -> Report:
    return run_experiment(cfg)
