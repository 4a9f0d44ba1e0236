"""Balls and boxes in R^c with exact membership predicates and covering nets."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ParamError


@dataclass(frozen=True)
class Region:
    """A ball or an axis-aligned box, in chart units.

    ``kind`` is ``"ball"`` (center, radius) or ``"box"`` (center, half_widths).
    Membership tests are plain floating-point comparisons on the defining
    inequalities, so they are exact for the represented set.
    """

    kind: str
    center: np.ndarray
    radius: float = 0.0
    half_widths: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.kind == "ball":
            if not self.radius > 0.0:
                raise ParamError("ball radius must be positive")
        elif self.kind == "box":
            hw = np.asarray(self.half_widths, dtype=float)
            if hw.shape != self.center.shape or not np.all(hw > 0.0):
                raise ParamError("box half-widths must be positive and match the center")
            object.__setattr__(self, "half_widths", hw)
        else:
            raise ParamError(f"unknown region kind {self.kind!r}")

    @staticmethod
    def ball(center, radius) -> "Region":
        return Region("ball", np.asarray(center, dtype=float), radius=float(radius))

    @staticmethod
    def box(center, half_widths) -> "Region":
        center = np.asarray(center, dtype=float)
        hw = np.asarray(half_widths, dtype=float)
        if hw.ndim == 0:
            hw = np.full_like(center, float(hw))
        return Region("box", center, half_widths=hw)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def depth(self, points) -> np.ndarray:
        """Signed distance to the complement: positive inside, negative outside.

        For a point p in the region this equals d(p, R^c \\ R); outside it is
        -d(p, R).  Works on a single point or an (n, c) batch.
        """
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "ball":
            out = self.radius - np.linalg.norm(p - self.center, axis=-1)
        else:
            gaps = self.half_widths - np.abs(p - self.center)
            neg = np.minimum(gaps, 0.0)
            outside = np.linalg.norm(neg, axis=-1)
            inside = np.min(gaps, axis=-1)
            out = np.where(outside > 0.0, -outside, inside)
        return out if np.ndim(points) > 1 else float(out[0])

    def contains(self, points, closed: bool = False):
        d = self.depth(points)
        return d >= 0.0 if closed else d > 0.0

    def distance_to_set(self, points) -> np.ndarray:
        """d(p, R) with the convention 0 inside."""
        d = self.depth(points)
        return np.maximum(-d, 0.0)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "ball":
            r = np.full(self.dim, self.radius)
        else:
            r = self.half_widths
        return self.center - r, self.center + r

    def inflate(self, pad: float) -> "Region":
        if self.kind == "ball":
            return Region.ball(self.center, self.radius + pad)
        return Region.box(self.center, self.half_widths + pad)

    def sample(self, n: int, rng) -> np.ndarray:
        """n points uniform in the region (rejection from the bounding box)."""
        lo, hi = self.bounding_box()
        out = np.empty((0, self.dim))
        while out.shape[0] < n:
            cand = rng.uniform(lo, hi, size=(max(2 * n, 64), self.dim))
            cand = cand[self.depth(cand) >= 0.0]
            out = np.vstack([out, cand])
        return out[:n]

    def to_json(self) -> dict:
        if self.kind == "ball":
            return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}
        return {
            "kind": "box",
            "center": self.center.tolist(),
            "half_widths": self.half_widths.tolist(),
        }

    @staticmethod
    def from_json(obj: dict) -> "Region":
        if obj["kind"] == "ball":
            return Region.ball(obj["center"], obj["radius"])
        return Region.box(obj["center"], obj["half_widths"])


def make_net(region: Region, h: float) -> np.ndarray:
    """Points of the closure of ``region`` such that every point of the closure
    is within ``h`` of a net point.

    Built from a cubic grid whose cell half-diagonal is slightly under ``h``;
    grid points just outside a ball are replaced by their radial projection
    (the metric projection is 1-Lipschitz, which preserves the h-cover claim).
    """
    if not h > 0.0:
        raise ParamError("net spacing h must be positive")
    c = region.dim
    step = 2.0 * h * 0.999 / np.sqrt(c)
    lo, hi = region.bounding_box()
    axes = []
    for k in range(c):
        n = max(int(np.ceil((hi[k] - lo[k]) / step)) + 1, 2)
        axes.append(np.linspace(lo[k], hi[k], n))
    grid = np.array(list(itertools.product(*axes)))
    depth = region.depth(grid)
    inside = grid[depth >= 0.0]
    if region.kind == "ball":
        near = grid[(depth < 0.0) & (depth > -h)]
        if near.shape[0]:
            rel = near - region.center
            proj = region.center + rel * (region.radius / np.linalg.norm(rel, axis=1))[:, None]
            inside = np.vstack([inside, proj])
    else:
        near = grid[(depth < 0.0) & (depth > -h)]
        if near.shape[0]:
            lo_b, hi_b = region.bounding_box()
            proj = np.clip(near, lo_b, hi_b)
            inside = np.vstack([inside, proj])
    return inside
