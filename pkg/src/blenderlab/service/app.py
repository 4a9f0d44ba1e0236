"""FastAPI service wrapping the certification pipeline."""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..errors import BlenderlabError
from ..pipeline import (PipelineConfig, audit_product_map_symplecticity,
                        build_arc_system, certify, robustness_sweep)
from ..symplectic import hamiltonian_bump_translation
from .models import (AuditRequest, AuditResponse, CertifyRequest,
                     CertifyResponse, ConfigModel, HealthResponse,
                     SweepRequest, SweepResponse)

app = FastAPI(title="blenderlab", version=__version__)


def _config_from_model(model: ConfigModel) -> PipelineConfig:
    data = model.model_dump()
    for key in ("domain_lo", "domain_hi", "site1", "site2", "disabled_checks"):
        data[key] = tuple(data[key])
    try:
        return PipelineConfig(**data)
    except BlenderlabError as exc:
        raise HTTPException(status_code=422, detail=str(exc))


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/certify", response_model=CertifyResponse)
def certify_endpoint(req: CertifyRequest) -> CertifyResponse:
    cfg = _config_from_model(req.config)
    cert = certify(cfg)
    return CertifyResponse(overall_pass=cert.overall_pass,
                           certificate=cert.to_json())


@app.post("/sweep", response_model=SweepResponse)
def sweep_endpoint(req: SweepRequest) -> SweepResponse:
    cfg = _config_from_model(req.config)
    table = robustness_sweep(cfg, req.eta_list, trials=req.trials)
    return SweepResponse(table=table.to_json())


@app.post("/audit-realization", response_model=AuditResponse)
def audit_endpoint(req: AuditRequest) -> AuditResponse:
    cfg = _config_from_model(req.config)
    build = build_arc_system(cfg)
    scale = max(build.scale, 1e-3)
    fiber = hamiltonian_bump_translation(
        center=np.zeros(cfg.dimension), r_inner=0.2, r_outer=1.0,
        vector=np.full(cfg.dimension, 0.05 * scale / np.sqrt(cfg.dimension)))
    r1, r2 = 0.5, 1.0
    rng = np.random.default_rng(cfg.seed)
    nb = cfg.dimension
    pts = []
    for radius in (0.2, 0.75, 1.3):
        for _ in range(max(req.n_points // 3, 2)):
            x = rng.standard_normal(nb)
            x *= radius / np.linalg.norm(x)
            y = rng.uniform(-1.0, 1.0, size=cfg.dimension)
            pts.append(np.concatenate([x, y]))
    report = audit_product_map_symplecticity(
        np.diag([2.0] * (nb // 2) + [0.5] * (nb // 2)), fiber, (r1, r2), pts)
    return AuditResponse(max_defect=report["max_defect"], report=report)
