"""Invertible fiber maps of R^c: affine maps, bump translations, compositions.

Every map exposes vectorized forward/inverse application, Jacobians, Lipschitz
bounds for the map and its inverse, and a conservative ball-transport rule used
by the semigroup search.  Bump translations are realized as time-one maps of a
compactly supported flow integrated by the implicit midpoint rule; their
Jacobians are accumulated as Cayley transforms of the field derivative, which
keeps the Hamiltonian variant exactly symplectic step by step.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, ParamError, StepSizeError
from .regions import Region


def standard_symplectic_matrix(c: int) -> np.ndarray:
    """The canonical skew matrix J for coordinates (x_1..x_n, y_1..y_n)."""
    if c % 2 != 0:
        raise DimensionError(f"canonical pairing needs an even dimension, got {c}")
    n = c // 2
    J = np.zeros((c, c))
    J[:n, n:] = np.eye(n)
    J[n:, :n] = -np.eye(n)
    return J


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


def _smoothstep_d1(u):
    inside = (u > 0.0) & (u < 1.0)
    uc = np.clip(u, 0.0, 1.0)
    return np.where(inside, 30.0 * uc * uc * (uc - 1.0) ** 2, 0.0)


def _smoothstep_d2(u):
    inside = (u > 0.0) & (u < 1.0)
    uc = np.clip(u, 0.0, 1.0)
    return np.where(inside, 60.0 * uc * (uc - 1.0) * (2.0 * uc - 1.0), 0.0)


def _as_batch(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


class FiberMap:
    """Base interface; subclasses are immutable after construction."""

    kind = "abstract"
    dim: int

    def apply(self, x):
        raise NotImplementedError

    def apply_inverse(self, y):
        raise NotImplementedError

    def __call__(self, x):
        return self.apply(x)

    def jacobian(self, x):
        raise NotImplementedError

    def lipschitz(self) -> float:
        raise NotImplementedError

    def lipschitz_inverse(self) -> float:
        raise NotImplementedError

    def transport_ball(self, center, radius):
        """(new_center, new_radius, exact) with B(new) contained in the image
        of B(center, radius); conservative when exactness is unavailable."""
        c = self.apply(np.asarray(center, dtype=float))
        return c, radius / self.lipschitz_inverse(), False

    def displacement_on(self, points) -> float:
        pts, _ = _as_batch(points)
        return float(np.max(np.linalg.norm(self.apply(pts) - pts, axis=-1), initial=0.0))

    def to_json(self) -> dict:
        raise NotImplementedError


class AffineMap(FiberMap):
    """x -> L x + b with an invertible linear part; all bounds are exact."""

    kind = "affine"

    def __init__(self, linear, offset=None):
        L = np.asarray(linear, dtype=float)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise ParamError("linear part must be square")
        self.linear = L
        self.dim = L.shape[0]
        self.offset = np.zeros(self.dim) if offset is None else np.asarray(offset, dtype=float)
        sv = np.linalg.svd(L, compute_uv=False)
        if sv[-1] <= 0.0:
            raise ParamError("linear part must be invertible")
        self._sv = sv
        self._inv = np.linalg.inv(L)

    @staticmethod
    def identity(dim: int) -> "AffineMap":
        return AffineMap(np.eye(dim))

    @staticmethod
    def translation(vector) -> "AffineMap":
        v = np.asarray(vector, dtype=float)
        return AffineMap(np.eye(v.shape[0]), v)

    def apply(self, x):
        xb, single = _as_batch(x)
        out = xb @ self.linear.T + self.offset
        return out[0] if single else out

    def apply_inverse(self, y):
        yb, single = _as_batch(y)
        out = (yb - self.offset) @ self._inv.T
        return out[0] if single else out

    def jacobian(self, x):
        xb, single = _as_batch(x)
        J = np.broadcast_to(self.linear, (xb.shape[0],) + self.linear.shape)
        return J[0] if single else np.array(J)

    def lipschitz(self) -> float:
        return float(self._sv[0])

    def lipschitz_inverse(self) -> float:
        return float(1.0 / self._sv[-1])

    def singular_values(self) -> np.ndarray:
        return self._sv.copy()

    def fixed_point_data(self):
        """Solve (I - L) x = b; returns (point | None, residual_ok)."""
        A = np.eye(self.dim) - self.linear
        try:
            x = np.linalg.solve(A, self.offset)
            return x, True
        except np.linalg.LinAlgError:
            return None, False

    def transport_ball(self, center, radius):
        return self.apply(np.asarray(center, dtype=float)), radius * float(self._sv[-1]), True

    def to_json(self) -> dict:
        return {
            "type": "affine",
            "linear": self.linear.tolist(),
            "offset": self.offset.tolist(),
        }


class BumpTranslation(FiberMap):
    """Time-one map of a flow that translates a core neighborhood and dies out.

    The profile chi equals 1 where d(z, core) <= plateau_pad and 0 where
    d(z, core) >= support_pad (quintic smoothstep in between).  Two fields:

    * plain:      z' = chi(d(z)) * t                       (any dimension)
    * symplectic: z' = J grad H,  H = chi(d(z)) <m, z-z0>,  m = -J t

    Points whose unit-time segment stays in the plateau are translated by
    exactly ``vector``; points outside the support never move.  The inverse is
    the reverse-time flow (the midpoint rule is self-adjoint, so it inverts the
    forward map to solver tolerance).
    """

    kind = "bump_translation"

    _FIXED_POINT_TOL = 1e-14
    _MAX_FIXED_POINT_ITERS = 80

    def __init__(self, core: Region, vector, plateau_pad: float, support_pad: float,
                 symplectic: bool = False, steps: int = 16):
        self.core = core
        self.dim = core.dim
        self.vector = np.asarray(vector, dtype=float)
        self.speed = float(np.linalg.norm(self.vector))
        if not 0.0 <= plateau_pad < support_pad:
            raise ParamError("need 0 <= plateau_pad < support_pad")
        if self.speed > 0.0 and plateau_pad < self.speed:
            raise StepSizeError(
                "plateau pad must cover the unit-time travel of the translation")
        self.plateau_pad = float(plateau_pad)
        self.support_pad = float(support_pad)
        self.symplectic = bool(symplectic)
        if self.symplectic:
            self._J = standard_symplectic_matrix(self.dim)
            self._m = -self._J @ self.vector
        self.steps = int(steps)
        self._width = self.support_pad - self.plateau_pad
        self._lip_cache = None
        # a sharper sup-displacement bound than the analytic field estimate,
        # when the constructor has certified one (e.g. rescaled perturbations)
        self.displacement_bound_override: float | None = None

    # -- geometry -------------------------------------------------------

    def _dist_grad(self, z):
        """distance to the core, unit outward gradient, and |z-center| data."""
        if self.core.kind == "ball":
            rel = z - self.core.center
            rho = np.linalg.norm(rel, axis=-1)
            d = np.maximum(rho - self.core.radius, 0.0)
            grad = rel / np.maximum(rho, 1e-300)[..., None]
            return d, grad, rho
        rel = z - self.core.center
        q = np.sign(rel) * np.maximum(np.abs(rel) - self.core.half_widths, 0.0)
        d = np.linalg.norm(q, axis=-1)
        grad = q / np.maximum(d, 1e-300)[..., None]
        return d, grad, d

    def _chi(self, d):
        return 1.0 - _smoothstep((d - self.plateau_pad) / self._width)

    def _chi_d1(self, d):
        return -_smoothstep_d1((d - self.plateau_pad) / self._width) / self._width

    def _chi_d2(self, d):
        return -_smoothstep_d2((d - self.plateau_pad) / self._width) / self._width ** 2

    # -- field ----------------------------------------------------------

    def _field(self, z):
        d, grad, _ = self._dist_grad(z)
        chi = self._chi(d)
        if not self.symplectic:
            return chi[..., None] * self.vector
        g = (z - self.core.center) @ self._m
        c1 = self._chi_d1(d)
        return (c1 * g)[..., None] * (grad @ self._J.T) + chi[..., None] * self.vector

    def _field_jacobian(self, z):
        n, c = z.shape
        d, grad, rho = self._dist_grad(z)
        c1 = self._chi_d1(d)
        if not self.symplectic:
            # Df = t (chi' grad d)^T, rank one
            return self.vector[None, :, None] * (c1[:, None] * grad)[:, None, :]
        g = (z - self.core.center) @ self._m
        c2 = self._chi_d2(d)
        gg = grad[:, :, None] * grad[:, None, :]
        if self.core.kind == "ball":
            hess_d = (np.eye(c)[None] - gg) / np.maximum(rho, 1e-12)[:, None, None]
        else:
            active = (np.abs(z - self.core.center) > self.core.half_widths).astype(float)
            P = active[:, :, None] * np.eye(c)[None]
            hess_d = (P - gg) / np.maximum(d, 1e-12)[:, None, None]
        gm = grad[:, :, None] * self._m[None, None, :]
        hess = ((c2 * g)[:, None, None] * gg
                + c1[:, None, None] * (gm + np.swapaxes(gm, 1, 2))
                + (c1 * g)[:, None, None] * hess_d)
        return np.einsum("ij,njk->nik", self._J, hess)

    # -- integration ----------------------------------------------------

    def _flow(self, x, direction, want_jacobian=False):
        z, single = _as_batch(x)
        if self.speed == 0.0:
            if want_jacobian:
                W = np.broadcast_to(np.eye(self.dim), (z.shape[0], self.dim, self.dim))
                return (z[0], W[0].copy()) if single else (z.copy(), np.array(W))
            return z[0].copy() if single else z.copy()
        h = direction / self.steps
        cur = np.array(z, copy=True)
        if want_jacobian:
            W = np.tile(np.eye(self.dim), (z.shape[0], 1, 1))
        eye = np.eye(self.dim)[None]
        for _ in range(self.steps):
            mid = cur + 0.5 * h * self._field(cur)
            for _ in range(self._MAX_FIXED_POINT_ITERS):
                nxt = cur + 0.5 * h * self._field(mid)
                if np.max(np.abs(nxt - mid)) < self._FIXED_POINT_TOL:
                    mid = nxt
                    break
                mid = nxt
            if want_jacobian:
                A = self._field_jacobian(mid)
                W = np.linalg.solve(eye - 0.5 * h * A, (eye + 0.5 * h * A) @ W)
            cur = 2.0 * mid - cur
        if want_jacobian:
            return (cur[0], W[0]) if single else (cur, W)
        return cur[0] if single else cur

    def apply(self, x):
        return self._flow(x, +1.0)

    def apply_inverse(self, y):
        return self._flow(y, -1.0)

    def jacobian(self, x):
        _, W = self._flow(x, +1.0, want_jacobian=True)
        return W

    def flow_time(self, x, t: float):
        """Time-t map of the same field, t in [-1, 1] (t=1 is apply)."""
        if t == 0.0:
            x = np.asarray(x, dtype=float)
            return x.copy()
        return self._flow(x, float(t))

    def flow_time_jacobian(self, x, t: float):
        if t == 0.0:
            xb, single = _as_batch(x)
            W = np.tile(np.eye(self.dim), (xb.shape[0], 1, 1))
            return W[0] if single else W
        _, W = self._flow(x, float(t), want_jacobian=True)
        return W

    # -- bounds ---------------------------------------------------------

    def _support_samples(self, n=160, seed=20):
        rng = np.random.default_rng(seed)
        lo, hi = self.core.inflate(self.support_pad * 1.02).bounding_box()
        return rng.uniform(lo, hi, size=(n, self.dim))

    def _lipschitz_pair(self):
        if self._lip_cache is None:
            if self.speed == 0.0:
                self._lip_cache = (1.0, 1.0)
            else:
                W = self.jacobian(self._support_samples())
                sv = np.linalg.svd(W, compute_uv=False)
                lip = max(1.0, float(sv[:, 0].max())) * 1.25
                lip_inv = max(1.0, float((1.0 / sv[:, -1]).max())) * 1.25
                self._lip_cache = (lip, lip_inv)
        return self._lip_cache

    def lipschitz(self) -> float:
        return self._lipschitz_pair()[0]

    def lipschitz_inverse(self) -> float:
        return self._lipschitz_pair()[1]

    def displacement_bound(self) -> float:
        """Analytic bound on sup |phi(z) - z|: integrate the field bound."""
        if self.speed == 0.0:
            return 0.0
        if self.displacement_bound_override is not None:
            return self.displacement_bound_override
        if not self.symplectic:
            return self.speed
        if self.core.kind == "ball":
            reach = self.core.radius + self.support_pad
        else:
            reach = float(np.linalg.norm(self.core.half_widths)) + self.support_pad
        chi_max = 1.875 / self._width
        return self.speed * (1.0 + chi_max * reach)

    def transport_ball(self, center, radius):
        center = np.asarray(center, dtype=float)
        d = float(self.core.distance_to_set(center[None])[0])
        if d + radius + self.speed * 1.001 <= self.plateau_pad:
            return center + self.vector, radius, True
        if d - radius >= self.support_pad:
            return center.copy(), radius, True
        # straddling: every point moves at most the displacement bound, so the
        # image still contains the concentric shrunken ball
        D = self.displacement_bound()
        if radius > D:
            return center.copy(), radius - D, True
        return self.apply(center), radius / self.lipschitz_inverse(), False

    def to_json(self) -> dict:
        if self.core.kind == "ball":
            return {
                "type": "bump_translation",
                "center": self.core.center.tolist(),
                "r_inner": self.core.radius + self.plateau_pad - 1.001 * self.speed,
                "r_outer": self.core.radius + self.support_pad,
                "vector": self.vector.tolist(),
                "symplectic": self.symplectic,
                "core_radius": self.core.radius,
                "steps": self.steps,
            }
        return {
            "type": "bump_translation",
            "region": self.core.to_json(),
            "plateau_pad": self.plateau_pad,
            "support_pad": self.support_pad,
            "vector": self.vector.tolist(),
            "symplectic": self.symplectic,
            "steps": self.steps,
        }


class CompositeMap(FiberMap):
    """Composition of fiber maps, applied first-to-last."""

    kind = "composite"

    def __init__(self, maps):
        maps = list(maps)
        if not maps:
            raise ParamError("composite needs at least one map")
        dims = {m.dim for m in maps}
        if len(dims) != 1:
            raise ParamError("composite maps must share a dimension")
        self.maps = maps
        self.dim = maps[0].dim

    def apply(self, x):
        for m in self.maps:
            x = m.apply(x)
        return x

    def apply_inverse(self, y):
        for m in reversed(self.maps):
            y = m.apply_inverse(y)
        return y

    def jacobian(self, x):
        xb, single = _as_batch(x)
        W = np.tile(np.eye(self.dim), (xb.shape[0], 1, 1))
        cur = xb
        for m in self.maps:
            W = m.jacobian(cur) @ W
            cur = m.apply(cur)
        return W[0] if single else W

    def lipschitz(self) -> float:
        out = 1.0
        for m in self.maps:
            out *= m.lipschitz()
        return out

    def lipschitz_inverse(self) -> float:
        out = 1.0
        for m in self.maps:
            out *= m.lipschitz_inverse()
        return out

    def transport_ball(self, center, radius):
        exact = True
        for m in self.maps:
            center, radius, ok = m.transport_ball(center, radius)
            exact = exact and ok
        return center, radius, exact

    def to_json(self) -> dict:
        return {"type": "composite", "maps": [m.to_json() for m in self.maps]}


def region_gap(a: Region, b: Region) -> float:
    """Lower bound on the distance between two regions (exact for these shapes)."""
    if a.kind == "ball" and b.kind == "ball":
        return float(np.linalg.norm(a.center - b.center) - a.radius - b.radius)
    if a.kind == "box" and b.kind == "box":
        gaps = np.abs(a.center - b.center) - a.half_widths - b.half_widths
        return float(np.max(gaps))
    ball, box = (a, b) if a.kind == "ball" else (b, a)
    return float(box.distance_to_set(ball.center[None])[0] - ball.radius)


class DisjointUnionMap(FiberMap):
    """Bump translations with pairwise disjoint supports glued into one map."""

    kind = "disjoint_union"

    def __init__(self, members):
        members = list(members)
        if not members:
            raise ParamError("union needs at least one member")
        self.dim = members[0].dim
        supports = [m.core.inflate(m.support_pad) for m in members]
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                if region_gap(supports[i], supports[j]) <= 0.0:
                    raise ParamError("union members must have disjoint supports")
        self.members = members
        self._supports = supports

    def _member_mask(self, z):
        masks = []
        for sup in self._supports:
            masks.append(sup.depth(z) > 0.0)
        return masks

    def apply(self, x):
        xb, single = _as_batch(x)
        out = np.array(xb, copy=True)
        for m, mask in zip(self.members, self._member_mask(xb)):
            if np.any(mask):
                out[mask] = m.apply(xb[mask])
        return out[0] if single else out

    def apply_inverse(self, y):
        yb, single = _as_batch(y)
        out = np.array(yb, copy=True)
        for m, mask in zip(self.members, self._member_mask(yb)):
            if np.any(mask):
                out[mask] = m.apply_inverse(yb[mask])
        return out[0] if single else out

    def jacobian(self, x):
        xb, single = _as_batch(x)
        W = np.tile(np.eye(self.dim), (xb.shape[0], 1, 1))
        for m, mask in zip(self.members, self._member_mask(xb)):
            if np.any(mask):
                W[mask] = m.jacobian(xb[mask])
        return W[0] if single else W

    def lipschitz(self) -> float:
        return max(m.lipschitz() for m in self.members)

    def lipschitz_inverse(self) -> float:
        return max(m.lipschitz_inverse() for m in self.members)

    def transport_ball(self, center, radius):
        center = np.asarray(center, dtype=float)
        touched = [m for m, sup in zip(self.members, self._supports)
                   if sup.depth(center[None])[0] > -radius]
        if not touched:
            return center.copy(), radius, True
        if len(touched) == 1:
            return touched[0].transport_ball(center, radius)
        return self.apply(center), radius / self.lipschitz_inverse(), False

    def to_json(self) -> dict:
        return {"type": "disjoint_union", "maps": [m.to_json() for m in self.members]}


def fiber_map_from_json(obj: dict) -> FiberMap:
    t = obj["type"]
    if t == "affine":
        return AffineMap(np.array(obj["linear"]), np.array(obj["offset"]))
    if t == "bump_translation":
        vector = np.array(obj["vector"])
        symplectic = bool(obj.get("symplectic", True))
        steps = int(obj.get("steps", 16))
        if "center" in obj:
            speed = float(np.linalg.norm(vector))
            core_radius = float(obj.get("core_radius", obj["r_inner"]))
            core = Region.ball(np.array(obj["center"]), max(core_radius, 1e-12))
            plateau = obj["r_inner"] + 1.001 * speed - core.radius
            support = obj["r_outer"] - core.radius
            return BumpTranslation(core, vector, plateau, support,
                                   symplectic=symplectic, steps=steps)
        core = Region.from_json(obj["region"])
        return BumpTranslation(core, vector, obj["plateau_pad"], obj["support_pad"],
                               symplectic=symplectic, steps=steps)
    if t == "composite":
        return CompositeMap([fiber_map_from_json(m) for m in obj["maps"]])
    if t == "disjoint_union":
        return DisjointUnionMap([fiber_map_from_json(m) for m in obj["maps"]])
    raise ParamError(f"unknown fiber map type {t!r}")
