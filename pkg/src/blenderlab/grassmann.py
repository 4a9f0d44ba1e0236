"""Lifted dynamics on R^c x G(l,c): cones, tangency blending regions,
transitions, and tangency codimension accounting.

Planes near a base plane are coordinatized as graphs over it; caps are
angle-balls in that chart.  For affine fiber maps the lifted action on planes
is x-independent, so product covers factor into a base check per rotation and
one plane check, each with its own sound net."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .covers import CoverCertificate, verify_open_cover
from .errors import BudgetError, ParamError, RankError, SubspaceClassError
from .fibermaps import AffineMap, FiberMap
from .regions import Region
from .symplectic import (PlaneFrame, classify_subspace, max_principal_angle,
                         symplectic_map_between_planes)

grassmann_distance = max_principal_angle


class LiftedMap:
    """(x, E) -> (phi(x), D phi(x) E) with orthonormalized image frames."""

    def __init__(self, fiber_map: FiberMap):
        self.fiber_map = fiber_map
        self.dim = fiber_map.dim

    def apply(self, x, E: PlaneFrame):
        x = np.asarray(x, dtype=float)
        D = self.fiber_map.jacobian(x)
        img = D @ E.frame
        Q, R = np.linalg.qr(img)
        if np.min(np.abs(np.diag(R))) < 1e-12 * max(1.0, float(np.max(np.abs(img)))):
            raise RankError("frame lost rank under the pushed-forward Jacobian")
        Q = Q * np.sign(np.diag(R))
        return self.fiber_map.apply(x), PlaneFrame(Q)


def lift_map(phi: FiberMap) -> LiftedMap:
    return LiftedMap(phi)


def plane_from_graph(base: PlaneFrame, L: np.ndarray) -> PlaneFrame:
    """The plane spanned by (V + W L) where V is the base frame and W its
    orthogonal complement."""
    W = base.orthogonal_complement()
    return PlaneFrame.from_spanning(base.frame + W @ np.atleast_2d(L))


def graph_norm(E: PlaneFrame, base: PlaneFrame) -> float:
    """Spectral norm of the graph map of E over the base; inf when E is not a
    graph over it."""
    V, W = base.frame, base.orthogonal_complement()
    A = V.T @ E.frame
    if np.linalg.svd(A, compute_uv=False)[-1] < 1e-12:
        return float("inf")
    L = (W.T @ E.frame) @ np.linalg.inv(A)
    return float(np.linalg.norm(L, 2))


@dataclass
class ConeSpec:
    """Planes expressible as graphs over the base with norm at most rho."""

    base: PlaneFrame
    opening: float           # rho, graph-norm bound
    type: str = "uu"         # uu | ss
    lambda_inv: float = 1.0  # claimed expansion on cone vectors

    def __post_init__(self):
        if self.opening <= 0.0:
            raise ParamError("cone opening must be positive")
        if self.type not in ("uu", "ss"):
            raise ParamError("cone type must be uu or ss")

    def contains_plane(self, E: PlaneFrame) -> bool:
        return graph_norm(E, self.base) <= self.opening

    def to_json(self) -> dict:
        return {"base_frame": self.base.to_json(), "opening": self.opening,
                "type": self.type, "lambda_inv": self.lambda_inv}


@dataclass
class ConeCertificate:
    passed: bool
    inclusion_margin: float    # rho - max image graph norm
    expansion_margin: float    # min ratio - lambda_inv
    max_image_opening: float
    min_expansion: float
    n_samples: int

    def to_json(self) -> dict:
        return {
            "pass": self.passed,
            "inclusion_margin": self.inclusion_margin,
            "expansion_margin": self.expansion_margin,
            "max_image_opening": self.max_image_opening,
            "min_expansion": self.min_expansion,
            "n_samples": self.n_samples,
        }


def _cone_sample_graphs(cone: ConeSpec, n_boundary: int, rng) -> list[np.ndarray]:
    V = cone.base
    l = V.rank
    m = V.dim - l
    out = []
    for _ in range(n_boundary):
        G = rng.standard_normal((m, l))
        out.append(cone.opening * G / np.linalg.norm(G, 2))
    for _ in range(10 * n_boundary):
        G = rng.standard_normal((m, l))
        out.append(rng.uniform(0.0, 1.0) * cone.opening * G / np.linalg.norm(G, 2))
    return out


def verify_unstable_cone(maps, cone: ConeSpec, R: Region, samples: int = 24,
                         seed: int = 8) -> ConeCertificate:
    """Check D phi(x) C subset int(C) and |D phi(x) v| >= lambda_inv |v| over
    sample points x in R with phi(x) in R, for every map."""
    rng = np.random.default_rng(seed)
    V = cone.base.frame
    W = cone.base.orthogonal_complement()
    graphs = _cone_sample_graphs(cone, n_boundary=16, rng=rng)
    max_opening = 0.0
    min_expansion = float("inf")
    used = 0
    for m in maps:
        pts = R.sample(samples, rng)
        keep = R.depth(m.apply(pts)) > 0.0
        pts = pts[keep]
        if pts.shape[0] == 0:
            continue
        jacs = m.jacobian(pts)
        for D in jacs:
            used += 1
            for L in graphs:
                P = plane_from_graph(cone.base, L)
                img = D @ P.frame
                Q, Rr = np.linalg.qr(img)
                if np.min(np.abs(np.diag(Rr))) < 1e-12:
                    return ConeCertificate(False, -np.inf, -np.inf, np.inf, 0.0, used)
                max_opening = max(max_opening, graph_norm(PlaneFrame(Q), cone.base))
                u = rng.standard_normal((L.shape[1],))
                v = V @ u + W @ (L @ u)
                ratio = np.linalg.norm(D @ v) / np.linalg.norm(v)
                min_expansion = min(min_expansion, float(ratio))
    inclusion_margin = cone.opening - max_opening
    expansion_margin = min_expansion - cone.lambda_inv
    passed = inclusion_margin > 0.0 and expansion_margin >= 0.0
    return ConeCertificate(passed=bool(passed), inclusion_margin=float(inclusion_margin),
                           expansion_margin=float(expansion_margin),
                           max_image_opening=float(max_opening),
                           min_expansion=float(min_expansion), n_samples=used)


# ---------------------------------------------------------------------------
# plane covers on caps
# ---------------------------------------------------------------------------


def _plane_net(base: PlaneFrame, radius_angle: float, h_plane: float):
    """Net of planes covering the closed angle-cap, with its angle spacing."""
    l = base.rank
    m = base.dim - l
    if l * m == 1:
        thetas = np.linspace(-radius_angle, radius_angle,
                             max(int(np.ceil(2 * radius_angle / h_plane)) + 1, 3))
        planes = [plane_from_graph(base, np.array([[np.tan(t)]])) for t in thetas]
        return planes
    # generic cap: entrywise grid on graph coordinates, clipped to the cap;
    # the axis resolution is capped because the grid is exponential in l(c-l)
    # (high-rank caps get a coarse sampled check, documented as such)
    tanr = np.tan(radius_angle)
    n_axis = max(min(int(np.ceil(2 * tanr / h_plane)) + 1, 7), 3)
    axes = [np.linspace(-tanr, tanr, n_axis)] * (l * m)
    import itertools
    planes = []
    for combo in itertools.product(*axes):
        L = np.array(combo).reshape(m, l)
        s = np.linalg.norm(L, 2)
        if s > tanr:
            L = L * (tanr / s)
        planes.append(plane_from_graph(base, L))
    return planes


def _plane_lipschitz(linears, base: PlaneFrame, radius_angle: float,
                     direction: str, rng) -> float:
    """Sampled Lipschitz bound (angle metric) of the plane transforms used for
    membership: inverse action for forward covers, forward action otherwise."""
    best = 0.0
    for A in linears:
        T = np.linalg.inv(A) if direction == "forward" else A
        for _ in range(60):
            l, m = base.rank, base.dim - base.rank
            L1 = rng.standard_normal((m, l))
            L1 *= np.tan(radius_angle) / max(np.linalg.norm(L1, 2), 1e-12)
            L2 = L1 + 1e-4 * rng.standard_normal((m, l))
            E1, E2 = plane_from_graph(base, L1), plane_from_graph(base, L2)
            d0 = max_principal_angle(E1, E2)
            if d0 < 1e-12:
                continue
            F1 = PlaneFrame.from_spanning(T @ E1.frame)
            F2 = PlaneFrame.from_spanning(T @ E2.frame)
            best = max(best, max_principal_angle(F1, F2) / d0)
    return best * 1.25


def _verify_plane_cover_1d(linears, base: PlaneFrame, radius_angle: float,
                           h_plane: float, direction: str) -> CoverCertificate:
    """Vectorized line-cap cover for rank-1 planes in the plane (c = 2)."""
    V = base.frame[:, 0]
    W = base.orthogonal_complement()[:, 0]
    thetas = np.linspace(-radius_angle, radius_angle,
                         max(int(np.ceil(2 * radius_angle / h_plane)) + 1, 3))
    vecs = np.outer(np.cos(thetas), V) + np.outer(np.sin(thetas), W)
    depths = np.empty((thetas.size, len(linears)))
    lip = 0.0
    for k, A in enumerate(linears):
        T = np.linalg.inv(A) if direction == "forward" else A
        w = vecs @ T.T
        ang = np.arctan2(np.abs(w @ W), np.abs(w @ V))
        depths[:, k] = radius_angle - ang
        dd = np.abs(np.diff(ang)) / np.abs(np.diff(thetas))
        lip = max(lip, float(dd.max()))
    L_bound = lip * 1.25
    best = depths.max(axis=1)
    margin = float(best.min())
    passed = margin > L_bound * h_plane
    witnesses = []
    if not passed:
        for i in np.flatnonzero(best <= L_bound * h_plane)[:64]:
            witnesses.append(vecs[i])
    return CoverCertificate(
        passed=bool(passed), margin=margin, net_spacing=float(h_plane),
        lipschitz_bound=float(L_bound), witness_failures=witnesses,
        image_margin=float(margin / max(L_bound, 1e-12)),
        direction=f"plane-{direction}", n_net=int(thetas.size), n_maps=len(linears),
    )


def verify_plane_cover(linears, base: PlaneFrame, radius_angle: float,
                       h_plane: float | None = None,
                       direction: str = "forward", seed: int = 12) -> CoverCertificate:
    """Cover of the closed angle-cap around ``base`` by the induced images of
    the open cap (forward: A.cap, membership via A^{-1}E; inverse: A^{-1}.cap,
    membership via A E).  The margin is the worst best-depth in angle units."""
    if base.dim == 2 and base.rank == 1:
        if h_plane is None:
            h_plane = radius_angle / 100.0
        return _verify_plane_cover_1d(linears, base, radius_angle, h_plane, direction)
    if h_plane is None:
        h_plane = radius_angle / 4.0
    rng = np.random.default_rng(seed)
    L_bound = _plane_lipschitz(linears, base, radius_angle, direction, rng)
    planes = _plane_net(base, radius_angle, h_plane)
    margin = float("inf")
    witnesses = []
    for E in planes:
        best = -float("inf")
        for A in linears:
            T = np.linalg.inv(A) if direction == "forward" else A
            pre = PlaneFrame.from_spanning(T @ E.frame)
            best = max(best, radius_angle - max_principal_angle(pre, base))
        margin = min(margin, best)
        if best <= L_bound * h_plane:
            witnesses.append(E.frame[:, 0])
    passed = margin > L_bound * h_plane
    return CoverCertificate(
        passed=bool(passed), margin=float(margin), net_spacing=float(h_plane),
        lipschitz_bound=float(L_bound), witness_failures=witnesses[:64],
        image_margin=float(margin / max(L_bound, 1e-12)),
        direction=f"plane-{direction}", n_net=len(planes), n_maps=len(linears),
    )


# ---------------------------------------------------------------------------
# tangency rotations and the product blending check
# ---------------------------------------------------------------------------


@dataclass
class TangencyRotations:
    rotations: list                 # near-identity symplectic matrices A_j
    cap_base: PlaneFrame            # E^uu
    cap_radius: float               # angle units
    contraction: float              # sigma_{l+1}/sigma_l of the linear model
    certificate: CoverCertificate   # plane cover of the cap by lift(A_j Lambda)
    angles: np.ndarray = field(default=None)


def _dominant_split(Lambda: np.ndarray, ell: int):
    lam, vecs = np.linalg.eig(Lambda)
    if np.max(np.abs(lam.imag)) > 1e-10:
        raise ParamError("the linear model must have a real spectrum")
    lam = lam.real
    order = np.argsort(-np.abs(lam))
    lam = lam[order]
    vecs = vecs.real[:, order]
    if abs(lam[ell - 1]) - abs(lam[ell]) < 1e-9:
        raise ParamError("no spectral gap at the requested index")
    E_uu = PlaneFrame.from_spanning(vecs[:, :ell])
    q = abs(lam[ell]) / abs(lam[ell - 1])
    return E_uu, q


def build_tangency_rotations(Lambda, ell: int, r: float, safety: float = 0.8,
                             h_plane: float | None = None) -> TangencyRotations:
    """Near-identity symplectic rotations A_j whose lifted maps throw the
    angle-cap of radius r around the dominant plane over itself.

    The dominant plane must be symplectic (even l) or coisotropic (odd l,
    which forces l >= c/2); the induced plane map contracts the cap by the
    spectral ratio, and rotation targets sit on a covering lattice of the cap.
    """
    Lambda = np.asarray(Lambda, dtype=float)
    c = Lambda.shape[0]
    if not 0 < ell < c:
        raise ParamError("need 0 < ell < c")
    E_uu, q = _dominant_split(Lambda, ell)
    cls = classify_subspace(E_uu)
    want = "symplectic" if ell % 2 == 0 else "coisotropic"
    if cls.kind != want:
        raise SubspaceClassError(
            f"dominant {ell}-plane is {cls.kind}, needs {want}"
            + (" (odd l below c/2 admits no coisotropic plane)" if ell % 2 else ""))
    half = np.arctan(np.tan(r) * q)
    spacing = 2.0 * half * safety
    k = max(int(np.ceil((r - 0.999 * half) / spacing)), 0)
    if ell * (c - ell) == 1:
        angles = np.arange(-k, k + 1) * spacing
        n = c // 2
        rotations = []
        for a in angles:
            R2 = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
            rotations.append(R2 if c == 2 else _embed_rotation(R2, c))
    else:
        import itertools
        pts = np.arange(-k, k + 1) * spacing
        angles = np.array(list(itertools.product(*([pts] * (ell * (c - ell))))))
        rotations = []
        for vec in angles:
            L = np.tan(vec).reshape(c - ell, ell)
            target = plane_from_graph(E_uu, L)
            rotations.append(symplectic_map_between_planes(E_uu, target))
    linears = [A @ Lambda for A in rotations]
    cert = verify_plane_cover(linears, E_uu, r, h_plane=h_plane, direction="forward")
    return TangencyRotations(rotations=rotations, cap_base=E_uu, cap_radius=r,
                             contraction=q, certificate=cert,
                             angles=np.asarray(angles))


def _embed_rotation(R2: np.ndarray, c: int) -> np.ndarray:
    out = np.eye(c)
    out[:2, :2] = R2
    return out


@dataclass
class TangencyBlendingSpec:
    """Product region B x (angle cap) with the lifted translate-rotation maps.

    ``direction`` cs means forward lifted covers; cu means inverse.  The cap
    must sit strictly inside the unstable cone."""

    base_region: Region
    cap_base: PlaneFrame
    cap_radius: float
    ell: int
    base_linear: np.ndarray     # Lambda (linear part about the site center)
    site_center: np.ndarray
    rotations: list
    base_translates: np.ndarray
    direction: str = "cs"
    cone: ConeSpec | None = None

    def __post_init__(self):
        if self.cone is not None:
            if np.tan(self.cap_radius) >= self.cone.opening:
                raise ParamError("the cap closure must sit strictly inside the cone")

    @property
    def n_lifted(self) -> int:
        return len(self.rotations) * len(self.base_translates)

    def lifted_base_maps(self, rotation) -> list[AffineMap]:
        """The base-factor affine maps x -> A (Lambda (x - p)) + p + t."""
        A = rotation @ self.base_linear
        p = self.site_center
        return [AffineMap(A, p + t - A @ p) for t in self.base_translates]

    def lifted_linears(self) -> list[np.ndarray]:
        return [A @ self.base_linear for A in self.rotations]

    def to_json(self) -> dict:
        return {
            "base_region": self.base_region.to_json(),
            "cap": {"base_frame": self.cap_base.to_json(),
                    "radius_angle": self.cap_radius},
            "ell": self.ell,
            "n_lifted": self.n_lifted,
            "direction": self.direction,
        }


@dataclass
class TangencyCertificate:
    passed: bool
    margin: float            # min of base margin and plane margin (product metric)
    base_certificates: list
    plane_certificate: CoverCertificate
    n_lifted: int

    def to_json(self) -> dict:
        return {
            "pass": self.passed,
            "margin": self.margin,
            "n_lifted": self.n_lifted,
            "base": [c.to_json() for c in self.base_certificates],
            "plane": self.plane_certificate.to_json(),
        }


def verify_tangency_blending(spec: TangencyBlendingSpec,
                             h_base: float | None = None,
                             h_plane: float | None = None) -> TangencyCertificate:
    """Product cover of closure(B x cap) by the lifted maps.

    The plane factor of an affine lift is x-independent, so a sound bound for
    the joint cover is the worst base cover over rotations combined with the
    plane cover over rotations; the margin is reported in the product metric
    max(base distance, angle)."""
    base_dir = "forward" if spec.direction == "cs" else "inverse"
    base_certs = []
    for A in spec.rotations:
        maps = spec.lifted_base_maps(A)
        base_certs.append(verify_open_cover(maps, spec.base_region,
                                            direction=base_dir, h=h_base))
    plane_cert = verify_plane_cover(spec.lifted_linears(), spec.cap_base,
                                    spec.cap_radius, h_plane=h_plane,
                                    direction=base_dir)
    base_margin = min(c.margin for c in base_certs)
    passed = all(c.passed for c in base_certs) and plane_cert.passed
    margin = min(base_margin, plane_cert.margin)
    return TangencyCertificate(passed=bool(passed), margin=float(margin),
                               base_certificates=base_certs,
                               plane_certificate=plane_cert,
                               n_lifted=spec.n_lifted)


# ---------------------------------------------------------------------------
# transitions and codimension bookkeeping
# ---------------------------------------------------------------------------


def find_transition(lifted_maps, start, to_region: Region, to_cap, max_len: int,
                    node_budget: int = 20_000):
    """Breadth-first word search carrying (point, plane) into the target
    product set; returns the witness word (1-based) or None.

    ``start`` is an (x, PlaneFrame) pair; ``to_cap`` is (PlaneFrame, angle)."""
    if max_len < 1:
        raise ParamError("max_len must be at least 1")
    if not lifted_maps:
        return None
    lifts = [m if isinstance(m, LiftedMap) else LiftedMap(m) for m in lifted_maps]
    cap_base, cap_radius = to_cap
    x0, E0 = start

    def in_target(x, E):
        return (to_region.depth(x) > 0.0
                and max_principal_angle(E, cap_base) < cap_radius)

    if in_target(np.asarray(x0, dtype=float), E0):
        return []
    states = [(np.asarray(x0, dtype=float), E0)]
    words = [[]]
    seen = set()
    frontier = [0]
    total = 1
    for _ in range(max_len):
        new_frontier = []
        for si in frontier:
            x, E = states[si]
            for gi, lm in enumerate(lifts, start=1):
                try:
                    x2, E2 = lm.apply(x, E)
                except RankError:
                    continue
                if in_target(x2, E2):
                    return words[si] + [gi]
                key = (tuple(np.round(x2, 6)),
                       tuple(np.round(E2.projector().ravel(), 6)))
                if key in seen:
                    continue
                seen.add(key)
                states.append((x2, E2))
                words.append(words[si] + [gi])
                new_frontier.append(len(states) - 1)
                total += 1
                if total > node_budget:
                    raise BudgetError("transition search exceeded its node budget",
                                      partial=None)
        frontier = new_frontier
        if not frontier:
            break
    return None


@dataclass(frozen=True)
class CodimensionReport:
    c_T: int
    admissible: bool

    def to_json(self) -> dict:
        return {"c_T": self.c_T, "admissible": self.admissible}


def tangency_codimension(ind_cu_1: int, ind_cs_2: int, ell: int, c: int) -> CodimensionReport:
    """c_T = c - (ind^cu(G1) + ind^cs(G2) - l); admissible iff
    max(0, i2 - i1) < l <= min(c - i1, i2) with i1, i2 the cs-indices."""
    for name, v in (("ind_cu_1", ind_cu_1), ("ind_cs_2", ind_cs_2)):
        if not 0 < v < c:
            raise ParamError(f"{name} must lie strictly between 0 and c")
    if ell <= 0:
        raise ParamError("ell must be positive")
    i1 = c - ind_cu_1
    i2 = ind_cs_2
    admissible = max(0, i2 - i1) < ell <= min(c - i1, i2)
    c_T = c - (ind_cu_1 + ind_cs_2 - ell)
    return CodimensionReport(c_T=int(c_T), admissible=bool(admissible))
