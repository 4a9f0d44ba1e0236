"""Sound numerical verification that families of map images cover compact sets.

Membership of a point p in an image phi(B) is decided through the preimage:
phi^{-1}(p) must sit inside B with a positive depth.  A net of spacing h plus
the inverse-map Lipschitz bound L turns finitely many such tests into a sound
statement about the whole closure: if every net point has preimage depth
greater than L*h under some map, every point of the closure lies in some open
image.  Certificates carry the worst-case depth as their margin (chart units).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ParamError, ShapeError
from .fibermaps import AffineMap, FiberMap
from .regions import Region, make_net


@dataclass
class CoverCertificate:
    passed: bool
    margin: float              # min over net points of max over maps of preimage depth
    net_spacing: float
    lipschitz_bound: float     # max Lipschitz constant of the membership transforms
    witness_failures: list = field(default_factory=list)
    image_margin: float = 0.0  # margin / lipschitz_bound, image-side slack
    direction: str = "forward"
    n_net: int = 0
    n_maps: int = 0

    def to_json(self) -> dict:
        return {
            "pass": self.passed,
            "margin": self.margin,
            "net_spacing": self.net_spacing,
            "lipschitz_bound": self.lipschitz_bound,
            "witness_failures": [list(map(float, w)) for w in self.witness_failures],
            "image_margin": self.image_margin,
            "direction": self.direction,
            "n_net": self.n_net,
            "n_maps": self.n_maps,
        }


def _membership_bound(maps, direction: str) -> float:
    if direction == "forward":
        L = max(m.lipschitz_inverse() for m in maps)
    elif direction == "inverse":
        L = max(m.lipschitz() for m in maps)
    else:
        raise ParamError(f"unknown direction {direction!r}")
    if not np.isfinite(L):
        raise ContractError("a map is missing a finite Lipschitz bound")
    return float(L)


def preimage_depths(maps, B: Region, points, direction: str = "forward") -> np.ndarray:
    """(n_points, n_maps) array of preimage depths in B."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty((pts.shape[0], len(maps)))
    for k, m in enumerate(maps):
        q = m.apply_inverse(pts) if direction == "forward" else m.apply(pts)
        out[:, k] = B.depth(q)
    return out


def verify_open_cover(maps, B: Region, direction: str = "forward",
                      h: float | None = None, max_witnesses: int = 64) -> CoverCertificate:
    """Certify that the closure of B lies in the union of the open images
    phi_i(B) (forward) or phi_i^{-1}(B) (inverse)."""
    if not maps:
        raise ParamError("need at least one map")
    L = _membership_bound(maps, direction)
    if h is None:
        scale = B.radius if B.kind == "ball" else float(np.min(B.half_widths))
        h = (scale / 20.0) / (4.0 * L)
    net = make_net(B, h)
    depths = preimage_depths(maps, B, net, direction)
    best = depths.max(axis=1)
    margin = float(best.min())
    threshold = L * h
    passed = margin > threshold
    witnesses = []
    if not passed:
        bad = np.flatnonzero(best <= threshold)
        order = bad[np.argsort(best[bad])]
        witnesses = [net[i] for i in order[:max_witnesses]]
    return CoverCertificate(
        passed=passed,
        margin=margin,
        net_spacing=float(h),
        lipschitz_bound=L,
        witness_failures=witnesses,
        image_margin=margin / L,
        direction=direction,
        n_net=int(net.shape[0]),
        n_maps=len(maps),
    )


def audit_cover_soundness(maps, B: Region, direction: str = "forward",
                          n_points: int = 100_000, seed: int = 0) -> int:
    """Number of random points of the closure missed by every open image.

    A passing certificate must audit to zero; this is the sampling cross-check
    used by the acceptance suite.
    """
    rng = np.random.default_rng(seed)
    pts = B.sample(n_points, rng)
    missed = 0
    chunk = 20_000
    for start in range(0, n_points, chunk):
        block = pts[start:start + chunk]
        depths = preimage_depths(maps, B, block, direction)
        missed += int(np.sum(depths.max(axis=1) <= 0.0))
    return missed


# ---------------------------------------------------------------------------
# regular simplex directions and ball covers by translates
# ---------------------------------------------------------------------------


def simplex_directions(c: int) -> np.ndarray:
    """c+1 unit vectors at the vertices of a regular simplex centered at 0."""
    if c < 1:
        raise ParamError("dimension must be at least 1")
    centered = np.eye(c + 1) - np.full((c + 1, c + 1), 1.0 / (c + 1))
    ones = np.ones((1, c + 1))
    _, _, Vt = np.linalg.svd(ones)
    basis = Vt[1:]  # orthonormal basis of the sum-zero hyperplane
    verts = centered @ basis.T
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    return verts


def simplex_kappa(dirs: np.ndarray) -> float:
    """min over unit p of max_i <p, u_i>, evaluated at the candidate minima
    (the antipodes of the vertices, where the min-max is attained)."""
    dots = dirs @ dirs.T
    # at p = -u_i the best direction realizes max_j -<u_i, u_j>
    return float(np.min(np.max(-dots, axis=1)))


def cover_ball_by_translates(eps: float, delta: float, dirs,
                             h: float | None = None) -> CoverCertificate:
    """Check closure(B_eps(0)) against the union of B_eps(0) + delta*u_i."""
    if not (eps > 0.0 and delta > 0.0):
        raise ParamError("eps and delta must be positive")
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    maps = [AffineMap.translation(delta * u) for u in dirs]
    ball = Region.ball(np.zeros(dirs.shape[1]), eps)
    if h is None:
        h = eps / 40.0
    return verify_open_cover(maps, ball, direction="forward", h=h)


# ---------------------------------------------------------------------------
# translate lattices covering a ball by images of a hyperbolic affine map
# ---------------------------------------------------------------------------


@dataclass
class TranslateLattice:
    centers: np.ndarray          # (k, c) translate vectors, in ambient coordinates
    contracted_axes: np.ndarray  # (c, c_s) orthonormal, the translated subspace
    slab_half_widths: np.ndarray
    count: int

    def to_json(self) -> dict:
        return {
            "centers": self.centers.tolist(),
            "count": self.count,
            "slab_half_widths": self.slab_half_widths.tolist(),
        }


def lattice_translate_centers(target_radius: float, image_map: AffineMap,
                              safety: float = 0.8, grid: str = "odd") -> TranslateLattice:
    """Translate vectors t_k so that the images (L . B_R) + t_k cover B_R.

    Translates live in the contracted singular subspace of the linear part;
    the usable slab half-width per contracted axis is shrunk by the worst
    cross-section loss over the expanding coordinates.  Spacing per axis is
    2 * w_i * safety / sqrt(c_s) on a cubic lattice (odd grids include the
    zero translate, even grids straddle it).
    """
    if not 0.0 < safety < 1.0:
        raise ParamError("safety must be in (0, 1)")
    L = image_map.linear
    c = L.shape[0]
    U, s, _ = np.linalg.svd(L)
    contracted = np.flatnonzero(s < 1.0 - 1e-9)
    expanding = np.flatnonzero(s > 1.0 + 1e-9)
    if contracted.size == 0:
        raise ShapeError("no contracted direction available for a cs cover")
    if expanding.size:
        beta_sq = 1.0 - 1.0 / float(np.min(s[expanding])) ** 2
        beta = np.sqrt(max(beta_sq, 0.0))
    else:
        beta = 1.0
    w = s[contracted] * target_radius * beta
    c_s = contracted.size
    spacing = 2.0 * w * safety / np.sqrt(c_s)
    axes_points = []
    for i in range(c_s):
        reach = (target_radius - 0.999 * w[i]) / spacing[i]
        if grid == "even":
            k = max(int(np.ceil(reach + 0.5)), 1)
            pts = (np.arange(-k, k) + 0.5) * spacing[i]
        else:
            k = max(int(np.ceil(reach)), 0)
            pts = np.arange(-k, k + 1) * spacing[i]
        axes_points.append(pts)
    raw = np.array(list(itertools.product(*axes_points)))
    scaled = raw / w
    keep = np.linalg.norm(scaled, axis=1) <= (target_radius / np.min(w)) + 1.0
    raw = raw[keep]
    centers = raw @ U[:, contracted].T
    return TranslateLattice(
        centers=centers,
        contracted_axes=U[:, contracted],
        slab_half_widths=w,
        count=centers.shape[0],
    )
