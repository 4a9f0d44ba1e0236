"""Request/response models for the certification service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class ConfigModel(BaseModel):
    """Mirrors PipelineConfig; unset fields take the pipeline defaults."""

    dimension: int = 2
    ell: int = 1
    eps: float = 0.5
    nu: float = 0.2
    alpha: float = 1.0
    window: int = 32
    seed: int = 7
    eps_ref: float = 0.5
    domain_lo: list[float] = Field(default_factory=lambda: [0.0, 0.0])
    domain_hi: list[float] = Field(default_factory=lambda: [3.0, 3.0])
    site1: list[float] = Field(default_factory=lambda: [1.0, 1.0])
    site2: list[float] = Field(default_factory=lambda: [2.0, 2.0])
    log_expansion: float = 0.6931471805599453
    cap_radius: float = 0.4
    cone_opening_angle: float = 0.7
    cone_lambda_inv: float = 1.5
    lattice_safety: float = 0.78
    atlas_eps: float = 0.3
    globalizer_scale: float = 0.2
    seed_ball_radius: float = 0.08
    target_spacing: float = 0.25
    max_word_len: int = 400
    node_budget: int = 400000
    h_base: float | None = None
    h_plane: float | None = None
    ph_samples: int = 48
    defect_samples: int = 100
    eta: float = 0.01
    trials: int = 20
    disabled_checks: list[str] = Field(default_factory=list)


class CertifyRequest(BaseModel):
    config: ConfigModel = Field(default_factory=ConfigModel)


class CertifyResponse(BaseModel):
    overall_pass: bool
    certificate: dict


class SweepRequest(BaseModel):
    config: ConfigModel = Field(default_factory=ConfigModel)
    eta_list: list[float]
    trials: int | None = None


class SweepResponse(BaseModel):
    table: dict


class AuditRequest(BaseModel):
    config: ConfigModel = Field(default_factory=ConfigModel)
    n_points: int = 24


class AuditResponse(BaseModel):
    max_defect: float
    report: dict


class HealthResponse(BaseModel):
    status: str
    version: str
