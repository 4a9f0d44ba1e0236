"""End-to-end construction and certification pipeline.

build_arc_system assembles the symplectic one-step family: a double-blending
site with rotation-augmented translates carrying an l-tangency, a cu-blending
site with its own tangency, a transition translation between them, and glued
chart translations that globalize a seed ball.  certify runs every checkable
hypothesis and aggregates a machine-readable certificate with margins.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .blender import BlendingRegionSpec, verify_blending_region
from .covers import lattice_translate_centers, preimage_depths, verify_open_cover
from .errors import BlenderlabError, ParamError
from .fibermaps import AffineMap, BumpTranslation, CompositeMap, standard_symplectic_matrix
from .globalization import chart_family_globalization, semigroup_coverage
from .grassmann import (ConeSpec, LiftedMap, TangencyBlendingSpec,
                        build_tangency_rotations, max_principal_angle,
                        tangency_codimension, verify_plane_cover,
                        verify_tangency_blending)
from .regions import Region
from .skewproduct import (OneStepSystem, hyperbolic_fixed_point,
                          hyperbolicity_constants, perturb_system)
from .symplectic import PlaneFrame, symplectic_defect


@dataclass
class PipelineConfig:
    dimension: int = 2
    ell: int = 1
    eps: float = 0.5
    nu: float = 0.2
    alpha: float = 1.0
    window: int = 32
    seed: int = 7
    eps_ref: float = 0.5
    domain_lo: tuple = (0.0, 0.0)
    domain_hi: tuple = (3.0, 3.0)
    site1: tuple = (1.0, 1.0)
    site2: tuple = (2.0, 2.0)
    log_expansion: float = float(np.log(2.0))
    cap_radius: float = 0.4
    cone_opening_angle: float = 0.7
    cone_lambda_inv: float = 1.5
    lattice_safety: float = 0.78
    atlas_eps: float = 0.3
    globalizer_scale: float = 0.2
    seed_ball_radius: float = 0.08
    target_spacing: float = 0.25
    max_word_len: int = 400
    node_budget: int = 400_000
    h_base: float | None = None
    h_plane: float | None = None
    ph_samples: int = 48
    defect_samples: int = 100
    eta: float = 0.01
    trials: int = 20
    disabled_checks: tuple = ()

    def __post_init__(self):
        if not 0 < self.ell <= self.dimension / 2:
            raise ParamError("need 0 < ell <= c/2")
        if self.eps < 0.0:
            raise ParamError("eps must be nonnegative")
        if self.dimension % 2 != 0:
            raise ParamError("the symplectic pipeline needs an even dimension")

    def to_json(self) -> dict:
        out = asdict(self)
        out["disabled_checks"] = list(self.disabled_checks)
        out["domain_lo"] = list(self.domain_lo)
        out["domain_hi"] = list(self.domain_hi)
        out["site1"] = list(self.site1)
        out["site2"] = list(self.site2)
        return out

    @staticmethod
    def from_json(obj: dict) -> "PipelineConfig":
        kwargs = dict(obj)
        for key in ("domain_lo", "domain_hi", "site1", "site2", "disabled_checks"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return PipelineConfig(**kwargs)

    def domain(self) -> Region:
        lo = np.asarray(self.domain_lo, dtype=float)
        hi = np.asarray(self.domain_hi, dtype=float)
        return Region.box(0.5 * (lo + hi), 0.5 * (hi - lo))

    def hash(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class ArcBuild:
    system: OneStepSystem
    base_map_symbol: int
    site1_product_symbols: list
    site1_inverse_symbols: list
    site2_symbols: list
    transition_symbol: int
    globalizer_symbols: list
    blend1_spec: BlendingRegionSpec
    blend2_spec: BlendingRegionSpec
    tangency1: TangencyBlendingSpec
    tangency2: TangencyBlendingSpec
    cone: ConeSpec
    seed_ball: Region
    rotations: list
    rotation_angles: np.ndarray
    contraction: float
    scale: float
    cache: dict = field(default_factory=dict)

    def site1_family(self):
        idx = [self.base_map_symbol] + self.site1_product_symbols + self.site1_inverse_symbols
        return [self.system.maps[i - 1] for i in idx]

    def site1_product_maps(self):
        return [self.system.maps[i - 1] for i in self.site1_product_symbols]

    def site2_maps(self):
        return [self.system.maps[i - 1] for i in self.site2_symbols]


def _reference_model(cfg: PipelineConfig):
    """The linear model and lattice geometry at the reference arc parameter."""
    c = cfg.dimension
    n = c // 2
    if cfg.ell != n or cfg.ell % 2 == 0:
        raise ParamError(
            "the diagonal linear model realizes tangency dimension ell = c/2 "
            "with ell odd (the dominant plane must be coisotropic)")
    log_diag = np.concatenate([np.full(n, cfg.log_expansion),
                               np.full(n, -cfg.log_expansion)])
    return np.diag(log_diag)


def build_arc_system(cfg: PipelineConfig) -> ArcBuild:
    """Assemble the symplectic fiber maps of the arc at parameter eps.

    Counts and support geometry come from the reference parameter; translation
    vectors, rotation angles and the hyperbolic strength all scale with
    eps/eps_ref, so at eps = 0 every map is exactly the identity.
    """
    c = cfg.dimension
    scale = cfg.eps / cfg.eps_ref
    log_ref = _reference_model(cfg)
    Lambda_ref = np.diag(np.exp(np.diag(log_ref)))
    Lambda = np.diag(np.exp(scale * np.diag(log_ref)))
    z1 = np.asarray(cfg.site1, dtype=float)
    z2 = np.asarray(cfg.site2, dtype=float)
    R_ref = cfg.eps_ref / 2.0

    def affine_about(site, linear, translate):
        return AffineMap(linear, site + translate - linear @ site)

    # reference lattices fix the counts; vectors scale with the arc parameter
    lat_fwd = lattice_translate_centers(R_ref, AffineMap(Lambda_ref),
                                        safety=cfg.lattice_safety, grid="even")
    lat_inv = lattice_translate_centers(R_ref, AffineMap(np.linalg.inv(Lambda_ref)),
                                        safety=cfg.lattice_safety, grid="even")
    rot_ref = build_tangency_rotations(Lambda_ref, cfg.ell, cfg.cap_radius,
                                       safety=cfg.lattice_safety * 1.02,
                                       h_plane=cfg.cap_radius)  # cover re-checked later
    angles = np.asarray(rot_ref.angles, dtype=float) * scale
    if cfg.ell * (c - cfg.ell) == 1:
        rotations = []
        for a in angles:
            R2 = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
            rotations.append(R2)
    else:
        raise ParamError("only scalar graph coordinates are wired into the arc")

    maps = []
    # 1: the base hyperbolic map at site 1
    maps.append(affine_about(z1, Lambda, np.zeros(c)))
    base_sym = 1
    # site-1 product family: rotations x forward translates
    s1_prod = []
    for A in rotations:
        for t in lat_fwd.centers:
            maps.append(affine_about(z1, A @ Lambda, scale * t))
            s1_prod.append(len(maps))
    # site-1 inverse-cover translates (identity rotation)
    s1_inv = []
    for cvec in lat_inv.centers:
        t = -Lambda_ref @ cvec
        maps.append(affine_about(z1, Lambda, scale * t))
        s1_inv.append(len(maps))
    # site-2 cu family
    s2 = []
    for cvec in lat_inv.centers:
        t = -Lambda_ref @ cvec
        maps.append(affine_about(z2, Lambda, scale * t))
        s2.append(len(maps))
    # transition translation from site 1 to site 2
    maps.append(AffineMap.translation(scale * (z2 - z1)))
    trans_sym = len(maps)
    # globalizers: glued chart translations over the domain
    atlas = chart_family_globalization(cfg.domain(), cfg.atlas_eps,
                                       scale=cfg.globalizer_scale * scale,
                                       symplectic=True)
    glob_syms = []
    for g in atlas.generators:
        maps.append(g)
        glob_syms.append(len(maps))

    system = OneStepSystem(maps, nu=cfg.nu, alpha=cfg.alpha, window=cfg.window,
                           domain=cfg.domain())

    delta = cfg.eps / 2.0 if cfg.eps > 0 else R_ref
    B1 = Region.ball(z1, delta)
    D1 = Region.ball(z1, 3.0 * max(cfg.eps, cfg.eps_ref) / 2.0)
    B2 = Region.ball(z2, delta)
    D2 = Region.ball(z2, 3.0 * max(cfg.eps, cfg.eps_ref) / 2.0)
    blend1 = BlendingRegionSpec(B=B1, D=D1, symbols=[base_sym] + s1_prod + s1_inv,
                                kind="double", cs_index=cfg.dimension - cfg.ell,
                                cu_index=cfg.ell)
    blend2 = BlendingRegionSpec(B=B2, D=D2, symbols=list(s2), kind="cu",
                                cs_index=cfg.dimension - cfg.ell, cu_index=cfg.ell)
    cone = ConeSpec(base=rot_ref.cap_base, opening=float(np.tan(cfg.cone_opening_angle)),
                    type="uu", lambda_inv=cfg.cone_lambda_inv)
    cap_radius = cfg.cap_radius * min(scale, 1.0)
    tang1 = TangencyBlendingSpec(
        base_region=B1, cap_base=rot_ref.cap_base, cap_radius=cap_radius,
        ell=cfg.ell, base_linear=Lambda, site_center=z1, rotations=rotations,
        base_translates=scale * lat_fwd.centers, direction="cs", cone=cone)
    tang2 = TangencyBlendingSpec(
        base_region=B2, cap_base=rot_ref.cap_base, cap_radius=cap_radius,
        ell=cfg.ell, base_linear=Lambda, site_center=z2,
        rotations=[np.eye(c)],
        base_translates=np.array([-scale * (Lambda_ref @ cvec) for cvec in lat_inv.centers]),
        direction="cu", cone=cone)
    return ArcBuild(
        system=system, base_map_symbol=base_sym, site1_product_symbols=s1_prod,
        site1_inverse_symbols=s1_inv, site2_symbols=s2, transition_symbol=trans_sym,
        globalizer_symbols=glob_syms, blend1_spec=blend1, blend2_spec=blend2,
        tangency1=tang1, tangency2=tang2, cone=cone,
        seed_ball=Region.ball(z1, cfg.seed_ball_radius),
        rotations=rotations, rotation_angles=angles,
        contraction=rot_ref.contraction, scale=scale,
    )


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------


@dataclass
class CheckRecord:
    name: str
    status: str          # pass | fail | skipped
    required: bool
    hypothesis: str
    margin: float | None = None
    parameters: dict = field(default_factory=dict)
    witnesses: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "required": self.required,
            "hypothesis": self.hypothesis,
            "margin": self.margin,
            "parameters": self.parameters,
            "witnesses": self.witnesses,
        }


@dataclass
class Certificate:
    schema: str
    overall_pass: bool
    checks: list
    provenance: dict
    verdicts: dict = field(default_factory=dict)

    def check(self, name: str) -> CheckRecord:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "schema": self.schema,
            "overall_pass": self.overall_pass,
            "checks": [c.to_json() for c in self.checks],
            "verdicts": self.verdicts,
            "provenance": self.provenance,
        }

    def dumps(self, strip_timestamp: bool = False) -> str:
        obj = self.to_json()
        if strip_timestamp:
            obj["provenance"] = {k: v for k, v in obj["provenance"].items()
                                 if k not in ("timestamp", "runtime_seconds",
                                              "wall_runtime")}
        return json.dumps(obj, sort_keys=True, indent=1)


def _json_safe(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


class _Runner:
    def __init__(self, disabled):
        self.disabled = set(disabled)
        self.records = []

    def run(self, name, required, hypothesis, fn):
        if name in self.disabled:
            self.records.append(CheckRecord(name, "skipped", required, hypothesis,
                                            parameters={"reason": "disabled"}))
            return None
        try:
            passed, margin, params, witnesses = fn()
            rec = CheckRecord(name, "pass" if passed else "fail", required,
                              hypothesis, margin=margin,
                              parameters=_json_safe(params),
                              witnesses=_json_safe(witnesses))
        except BlenderlabError as exc:
            rec = CheckRecord(name, "fail", required, hypothesis,
                              parameters={"error": f"{type(exc).__name__}: {exc}"})
        self.records.append(rec)
        return rec


def max_symplectic_defect(maps, domain: Region, samples: int, seed: int = 14) -> float:
    rng = np.random.default_rng(seed)
    J = standard_symplectic_matrix(maps[0].dim)
    worst = 0.0
    for m in maps:
        pts = domain.sample(samples, rng)
        W = m.jacobian(pts)
        worst = max(worst, float(np.max(np.abs(np.swapaxes(W, 1, 2) @ J @ W - J))))
    return worst


def certify(cfg: PipelineConfig, _reuse_build: ArcBuild | None = None,
            _system_override: OneStepSystem | None = None) -> Certificate:
    """Run every checkable hypothesis for the arc at cfg.eps and aggregate a
    certificate.  Check failures are recorded, never raised."""
    started = time.time()
    provenance = {
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "tool_version": __version__,
        "timestamp": started,
        "config": cfg.to_json(),
    }
    if cfg.eps == 0.0:
        checks = [CheckRecord("arc_endpoint", "skipped", True,
                              "identity endpoint of the arc",
                              parameters={"reason": "arc endpoint is the identity"})]
        return Certificate(schema="blenderlab-cert/1", overall_pass=False,
                           checks=checks, provenance=provenance,
                           verdicts={"status": "skipped"})

    runner = _Runner(cfg.disabled_checks)
    try:
        build = _reuse_build or build_arc_system(cfg)
    except BlenderlabError as exc:
        checks = [CheckRecord("construction", "fail", True, "arc assembly",
                              parameters={"error": f"{type(exc).__name__}: {exc}"})]
        return Certificate(schema="blenderlab-cert/1", overall_pass=False,
                           checks=checks, provenance=provenance)
    system = _system_override or build.system
    if system.nu != cfg.nu or system.alpha != cfg.alpha:
        system = OneStepSystem(system.maps, nu=cfg.nu, alpha=cfg.alpha,
                               window=cfg.window, domain=system.domain)
    domain = cfg.domain()

    def ph_check():
        rep = hyperbolicity_constants(system, domain, samples=cfg.ph_samples,
                                      seed=cfg.seed)
        margin = min(rep.gamma - rep.nu_alpha, 1.0 / rep.nu_alpha - rep.gamma_hat_inv)
        return rep.partially_hyperbolic, float(margin), rep.to_json(), []

    runner.run("partial_hyperbolicity", True,
               "uniform fiber rates dominated by the base contraction", ph_check)

    def bunching_family():
        fam = build.site1_family()
        sub = OneStepSystem(fam, nu=cfg.nu, alpha=cfg.alpha, window=cfg.window)
        rep = hyperbolicity_constants(sub, build.blend1_spec.B, samples=cfg.ph_samples,
                                      seed=cfg.seed)
        margin = rep.gamma / rep.gamma_hat_inv - rep.nu_alpha
        return rep.fiber_bunched, float(margin), rep.to_json(), []

    runner.run("fiber_bunching_tangency_family", True,
               "bunched rates on the tangency-carrying family", bunching_family)

    def bunching_global():
        rep = hyperbolicity_constants(system, domain, samples=cfg.ph_samples,
                                      seed=cfg.seed)
        margin = rep.gamma / rep.gamma_hat_inv - rep.nu_alpha
        return rep.fiber_bunched, float(margin), rep.to_json(), []

    runner.run("fiber_bunching_global", False,
               "bunched rates over the full alphabet (reported)", bunching_global)

    def fixed_point():
        fp = hyperbolic_fixed_point(system.maps[build.base_map_symbol - 1])
        ok = fp is not None and fp.hyperbolic and bool(
            build.blend1_spec.B.contains(fp.point))
        margin = float(build.blend1_spec.B.depth(fp.point)) if fp is not None else None
        return ok, margin, fp.to_json() if fp else {}, []

    runner.run("hyperbolic_fixed_point_in_blending_region", True,
               "a fiber map fixes a hyperbolic point inside the region", fixed_point)

    cover_cache = {}

    def blend1():
        fam = build.site1_family()
        certs = verify_blending_region(fam, build.blend1_spec, h=cfg.h_base)
        cover_cache["blend1"] = certs
        params = certs.to_json()
        return certs.passed, float(certs.margin), params, []

    runner.run("double_blending_cover_site1", True,
               "forward and inverse images of the site-1 region cover its closure",
               blend1)

    def blend2():
        certs = verify_blending_region(build.site2_maps(), build.blend2_spec,
                                       h=cfg.h_base)
        cover_cache["blend2"] = certs
        return certs.passed, float(certs.margin), certs.to_json(), []

    runner.run("cu_blending_cover_site2", True,
               "inverse images of the site-2 region cover its closure", blend2)

    def cone_check():
        from .grassmann import verify_unstable_cone
        cert = verify_unstable_cone(build.site1_product_maps(), build.cone,
                                    build.blend1_spec.B, samples=12, seed=cfg.seed)
        cover_cache["cone"] = cert
        margin = min(cert.inclusion_margin, cert.expansion_margin)
        return cert.passed, float(margin), cert.to_json(), []

    runner.run("unstable_cone_site1", True,
               "the lifted family keeps and expands the unstable cone", cone_check)

    def tang1():
        cert = verify_tangency_blending(build.tangency1, h_base=cfg.h_base,
                                        h_plane=cfg.h_plane)
        cover_cache["tang1"] = cert
        return cert.passed, float(cert.margin), cert.to_json(), []

    runner.run("tangency_product_cover_site1", True,
               "lifted forward images cover the site-1 product region", tang1)

    def tang2():
        cert = verify_tangency_blending(build.tangency2, h_base=cfg.h_base,
                                        h_plane=cfg.h_plane)
        cover_cache["tang2"] = cert
        return cert.passed, float(cert.margin), cert.to_json(), []

    runner.run("tangency_product_cover_site2", True,
               "lifted inverse images cover the site-2 product region", tang2)

    def transition():
        from .grassmann import find_transition
        lifted_syms = ([build.transition_symbol, build.base_map_symbol]
                       + build.site1_product_symbols + build.site2_symbols)
        lifted = [system.maps[i - 1] for i in lifted_syms]
        start = (np.asarray(cfg.site1, dtype=float), build.tangency1.cap_base)
        word = find_transition(lifted, start, build.tangency2.base_region,
                               (build.tangency2.cap_base, build.tangency2.cap_radius),
                               max_len=5)
        if word is None:
            return False, None, {"witness": None}, []
        sys_word = [lifted_syms[g - 1] for g in word]
        x, E = start
        for g in word:
            x, E = LiftedMap(lifted[g - 1]).apply(x, E)
        margin = min(float(build.tangency2.base_region.depth(x)),
                     build.tangency2.cap_radius - max_principal_angle(
                         E, build.tangency2.cap_base))
        cover_cache["transition"] = (sys_word, start)
        return True, margin, {"witness": sys_word, "length": len(sys_word)}, []

    runner.run("transition_witness", True,
               "a semigroup word carries the first product region into the second",
               transition)

    lo = np.asarray(cfg.domain_lo, dtype=float)
    hi = np.asarray(cfg.domain_hi, dtype=float)
    axes = [np.linspace(lo[k], hi[k],
                        max(int(np.ceil((hi[k] - lo[k]) / cfg.target_spacing)) + 1, 2))
            for k in range(cfg.dimension)]
    mesh = np.meshgrid(*axes, indexing="ij")
    K_net = np.column_stack([m.ravel() for m in mesh])

    def globalization(direction):
        def inner():
            run = semigroup_coverage(system.maps, build.seed_ball, K_net,
                                     cfg.max_word_len, direction=direction,
                                     node_budget=cfg.node_budget)
            cover_cache[f"glob_{direction}"] = run
            params = {"n_states": run.n_states, "layers": run.layers,
                      "targets": int(K_net.shape[0]),
                      "uncovered": len(run.uncovered)}
            return run.covered, None, params, [list(map(float, p)) for p in run.uncovered[:16]]
        return inner

    runner.run("globalization_forward", True,
               "the forward semigroup orbit of the seed ball covers the target net",
               globalization("forward"))
    runner.run("globalization_backward", True,
               "the backward semigroup orbit of the seed ball covers the target net",
               globalization("backward"))

    def codim():
        rep = tangency_codimension(build.blend1_spec.cu_index,
                                   build.blend2_spec.cs_index,
                                   cfg.ell, cfg.dimension)
        return rep.admissible, None, rep.to_json(), []

    runner.run("tangency_codimension_admissible", True,
               "the tangency dimension fits the index window", codim)

    def defects():
        worst = max_symplectic_defect(system.maps, domain, cfg.defect_samples,
                                      seed=cfg.seed)
        return worst <= 1e-8, float(1e-8 - worst), {"max_defect": worst}, []

    runner.run("symplectic_defects", True,
               "every fiber map is symplectic to tolerance", defects)

    required = [r for r in runner.records if r.required and r.status != "skipped"]
    overall = all(r.status == "pass" for r in required) and len(required) > 0
    provenance["runtime_seconds"] = time.time() - started
    verdicts = {
        "robust_transitivity_hypotheses": all(
            r.status == "pass" for r in runner.records
            if r.name in ("partial_hyperbolicity",
                          "hyperbolic_fixed_point_in_blending_region",
                          "double_blending_cover_site1",
                          "globalization_forward", "globalization_backward")),
        "robust_tangency_hypotheses": all(
            r.status == "pass" for r in runner.records
            if r.name in ("fiber_bunching_tangency_family", "unstable_cone_site1",
                          "tangency_product_cover_site1",
                          "tangency_product_cover_site2", "transition_witness",
                          "tangency_codimension_admissible")),
    }
    return Certificate(schema="blenderlab-cert/1", overall_pass=bool(overall),
                       checks=runner.records, provenance=provenance,
                       verdicts=verdicts)


# ---------------------------------------------------------------------------
# robustness sweep
# ---------------------------------------------------------------------------


# Lipschitz allowance for perturbation bumps in the cover re-check threshold:
# their field-derivative stays under ln 3 for the support shapes perturb_system
# emits, so the perturbed inverse maps are at most 3x the base bound.
_PERT_LIP_ALLOWANCE = 3.0


class _CoverRecheck:
    """Cached preimage depths of a cover check, updated locally under
    perturbations (a post-composed bump only moves points in its support)."""

    def __init__(self, maps, B: Region, direction: str, h: float | None):
        from .covers import _membership_bound, make_net
        self.B = B
        self.direction = direction
        self.L = _membership_bound(maps, direction)
        if h is None:
            scale = B.radius if B.kind == "ball" else float(np.min(B.half_widths))
            h = (scale / 20.0) / (4.0 * self.L)
        self.h = h
        self.net = make_net(B, h)
        self.base_depths = np.empty((self.net.shape[0], len(maps)))
        self.fwd_points = []   # forward: base preimages; inverse: base images
        for k, m in enumerate(maps):
            q = m.apply_inverse(self.net) if direction == "forward" else m.apply(self.net)
            self.fwd_points.append(q)
            self.base_depths[:, k] = B.depth(q)

    def run(self, perturbed_maps) -> tuple[bool, float]:
        depths = self.base_depths.copy()
        for k, pm in enumerate(perturbed_maps):
            if not isinstance(pm, CompositeMap):
                continue
            orig, bump = pm.maps[0], pm.maps[-1]
            support = bump.core.inflate(bump.support_pad * 1.001)
            if self.direction == "forward":
                mask = support.depth(self.net) > 0.0
                if np.any(mask):
                    q = orig.apply_inverse(bump.apply_inverse(self.net[mask]))
                    depths[mask, k] = self.B.depth(q)
            else:
                img = self.fwd_points[k]
                mask = support.depth(img) > 0.0
                if np.any(mask):
                    depths[mask, k] = self.B.depth(bump.apply(img[mask]))
        margin = float(depths.max(axis=1).min())
        return margin > _PERT_LIP_ALLOWANCE * self.L * self.h, margin


def _build_recheck_cache(build: ArcBuild, cfg: PipelineConfig) -> dict:
    if "recheck" in build.cache:
        return build.cache["recheck"]
    sys_maps = build.system.maps
    fam1 = [build.base_map_symbol] + build.site1_product_symbols + build.site1_inverse_symbols
    cache = {
        "blend1_fwd": (fam1, _CoverRecheck([sys_maps[i - 1] for i in fam1],
                                           build.blend1_spec.B, "forward", cfg.h_base)),
        "blend1_inv": (fam1, _CoverRecheck([sys_maps[i - 1] for i in fam1],
                                           build.blend1_spec.B, "inverse", cfg.h_base)),
        "blend2_inv": (build.site2_symbols,
                       _CoverRecheck([sys_maps[i - 1] for i in build.site2_symbols],
                                     build.blend2_spec.B, "inverse", cfg.h_base)),
        "tang1_base": (build.site1_product_symbols,
                       _CoverRecheck([sys_maps[i - 1] for i in build.site1_product_symbols],
                                     build.blend1_spec.B, "forward", cfg.h_base)),
    }
    build.cache["recheck"] = cache
    return cache


def _reverify(build: ArcBuild, cfg: PipelineConfig, perturbed: OneStepSystem,
              short_circuit: bool = False) -> dict:
    """Verification-only pass on a perturbed system, reusing the build's
    specs, nets and targets (no construction)."""
    results = {}
    cache = _build_recheck_cache(build, cfg)

    def recheck(key):
        idx, rc = cache[key]
        ok, margin = rc.run([perturbed.maps[i - 1] for i in idx])
        return ok

    b1f = recheck("blend1_fwd")
    b1i = recheck("blend1_inv")
    results["double_blending_cover_site1"] = b1f and b1i
    results["cu_blending_cover_site2"] = recheck("blend2_inv")

    # plane factor under perturbation: sampled Jacobians of the lifted maps
    rng = np.random.default_rng(cfg.seed + 1)
    site_pts = build.blend1_spec.B.sample(2, rng)
    linears = []
    for i in build.site1_product_symbols:
        linears.extend(list(perturbed.maps[i - 1].jacobian(site_pts)))
    plane_cert = verify_plane_cover(linears, build.tangency1.cap_base,
                                    build.tangency1.cap_radius,
                                    h_plane=cfg.h_plane, direction="forward")
    results["tangency_product_cover_site1"] = bool(plane_cert.passed
                                                   and recheck("tang1_base"))
    results["tangency_product_cover_site2"] = results["cu_blending_cover_site2"]

    # transition witness replay
    x = np.asarray(cfg.site1, dtype=float)
    E = build.tangency1.cap_base
    try:
        x, E = LiftedMap(perturbed.maps[build.transition_symbol - 1]).apply(x, E)
        ok = (build.tangency2.base_region.depth(x) > 0.0
              and max_principal_angle(E, build.tangency2.cap_base)
              < build.tangency2.cap_radius)
    except BlenderlabError:
        ok = False
    results["transition_witness"] = bool(ok)

    if short_circuit and not all(results.values()):
        results["globalization_forward"] = False
        results["globalization_backward"] = False
        return results

    lo = np.asarray(cfg.domain_lo, dtype=float)
    hi = np.asarray(cfg.domain_hi, dtype=float)
    axes = [np.linspace(lo[k], hi[k],
                        max(int(np.ceil((hi[k] - lo[k]) / cfg.target_spacing)) + 1, 2))
            for k in range(cfg.dimension)]
    mesh = np.meshgrid(*axes, indexing="ij")
    K_net = np.column_stack([m.ravel() for m in mesh])
    for direction in ("forward", "backward"):
        try:
            run = semigroup_coverage(perturbed.maps, build.seed_ball, K_net,
                                     cfg.max_word_len, direction=direction,
                                     node_budget=cfg.node_budget)
            results[f"globalization_{direction}"] = run.covered
        except BlenderlabError:
            results[f"globalization_{direction}"] = False
    return results


@dataclass
class SweepRow:
    eta: float
    trials: int
    passes: int
    failed_checks: list

    def to_json(self) -> dict:
        return {"eta": self.eta, "trials": self.trials, "passes": self.passes,
                "failed_checks": sorted(set(self.failed_checks))}


@dataclass
class SweepTable:
    rows: list
    largest_all_pass: float | None
    smallest_any_fail: float | None

    def to_json(self) -> dict:
        return {
            "rows": [r.to_json() for r in self.rows],
            "largest_all_pass": self.largest_all_pass,
            "smallest_any_fail": self.smallest_any_fail,
        }


def robustness_sweep(cfg: PipelineConfig, eta_list, trials: int | None = None,
                     build: ArcBuild | None = None) -> SweepTable:
    """Perturb each fiber map by seeded bump translations of size eta and
    re-run the verification checks (construction skipped)."""
    build = build or build_arc_system(cfg)
    trials = trials if trials is not None else cfg.trials
    rows = []
    for eta in eta_list:
        passes = 0
        failed = []
        for k in range(trials):
            if eta == 0.0:
                perturbed = build.system
            else:
                perturbed = perturb_system(build.system, eta,
                                           seed=cfg.seed + 1000 * k,
                                           symplectic=True)
            res = _reverify(build, cfg, perturbed, short_circuit=True)
            if all(res.values()):
                passes += 1
            else:
                failed.extend([k for k, v in res.items() if not v])
        rows.append(SweepRow(eta=float(eta), trials=trials, passes=passes,
                             failed_checks=failed))
    all_pass = [r.eta for r in rows if r.passes == r.trials]
    any_fail = [r.eta for r in rows if r.passes < r.trials]
    return SweepTable(rows=rows,
                      largest_all_pass=max(all_pass) if all_pass else None,
                      smallest_any_fail=min(any_fail) if any_fail else None)


# ---------------------------------------------------------------------------
# realization bookkeeping and the product-map audit
# ---------------------------------------------------------------------------


def assign_cylinders_to_rectangles(d: int, num_rectangles: int,
                                   cylinder_len: int) -> list:
    """Assign to each rectangle/cylinder the fiber-map index given by the
    zeroth symbol of its defining block (blocks in lexicographic order)."""
    if d < 1 or cylinder_len < 1:
        raise ParamError("need d >= 1 and cylinder_len >= 1")
    length = None
    for k in range(1, cylinder_len + 1):
        if num_rectangles == d ** k:
            length = k
            break
    if length is None:
        raise ParamError(
            f"num_rectangles must be d^k for some k <= cylinder_len, got {num_rectangles}")
    import itertools
    blocks = list(itertools.product(range(1, d + 1), repeat=length))
    return [{"block": list(b), "map_index": b[0]} for b in blocks]


def _interface_profile(s, r1: float, r2: float):
    u = np.clip((np.asarray(s, dtype=float) - r1) / (r2 - r1), 0.0, 1.0)
    return 1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


def audit_product_map_symplecticity(F_linear, fiber: BumpTranslation,
                                    interface_profile: tuple, points,
                                    fd_step: float = 1e-6) -> dict:
    """Defect table for the glued product map f(x, y) = (F x, phi(|x|, y)).

    The fiber isotopy runs the bump flow for time psi(|x|); the full Jacobian
    is finite-differenced and tested against the block pairing.  Cross terms
    between the factors are reported, never assumed away.
    """
    F = np.asarray(F_linear, dtype=float)
    nb = F.shape[0]
    cm = fiber.dim
    r1, r2 = interface_profile
    if not 0.0 < r1 < r2:
        raise ParamError("interface profile needs 0 < r1 < r2")
    Jfull = np.zeros((nb + cm, nb + cm))
    Jfull[:nb, :nb] = standard_symplectic_matrix(nb)
    Jfull[nb:, nb:] = standard_symplectic_matrix(cm)

    def glued(z):
        x, y = z[:nb], z[nb:]
        t = float(_interface_profile(np.linalg.norm(x), r1, r2))
        return np.concatenate([F @ x, fiber.flow_time(y, t)])

    table = []
    worst = 0.0
    for z in points:
        z = np.asarray(z, dtype=float)
        D = np.zeros((nb + cm, nb + cm))
        for j in range(nb + cm):
            e = np.zeros(nb + cm)
            e[j] = fd_step
            D[:, j] = (glued(z + e) - glued(z - e)) / (2.0 * fd_step)
        defect = float(np.max(np.abs(D.T @ Jfull @ D - Jfull)))
        radial = float(np.linalg.norm(z[:nb]))
        table.append({"radius": radial, "defect": defect})
        worst = max(worst, defect)
    return {"max_defect": worst, "table": table}
