"""Construction and certification of cs/cu/double blending regions around a
hyperbolic affine map: the map's translates must throw the region over itself
(forward images for cs, inverse images for cu)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .covers import CoverCertificate, lattice_translate_centers, verify_open_cover
from .errors import IndeterminateIndexError, ParamError, ShapeError
from .fibermaps import AffineMap
from .regions import Region
from .skewproduct import hyperbolic_fixed_point


@dataclass
class BlendingRegionSpec:
    B: Region
    D: Region
    symbols: list            # indices (1-based) of the participating maps
    kind: str                # cs | cu | double
    cs_index: int
    cu_index: int

    def __post_init__(self):
        if self.kind not in ("cs", "cu", "double"):
            raise ParamError(f"unknown blending kind {self.kind!r}")
        gap = self.D.depth(self.B.center) - (self.B.radius if self.B.kind == "ball"
                                             else float(np.max(self.B.half_widths)))
        if gap <= 0.0:
            raise ParamError("closure of B must sit inside D")
        if self.kind == "double" and not (self.cs_index > 0 and self.cu_index > 0):
            raise ParamError("a double blending region needs both indices positive")

    @property
    def contracting(self) -> bool:
        return self.cs_index == self.B.dim

    @property
    def expanding(self) -> bool:
        return self.cu_index == self.B.dim

    def to_json(self) -> dict:
        return {
            "B": self.B.to_json(),
            "D": self.D.to_json(),
            "symbols": list(self.symbols),
            "kind": self.kind,
            "cs_index": self.cs_index,
            "cu_index": self.cu_index,
        }


@dataclass
class BlendingCertificates:
    forward: CoverCertificate | None
    inverse: CoverCertificate | None

    @property
    def passed(self) -> bool:
        for cert in (self.forward, self.inverse):
            if cert is not None and not cert.passed:
                return False
        return True

    @property
    def margin(self) -> float:
        margins = [c.margin for c in (self.forward, self.inverse) if c is not None]
        return min(margins)

    def to_json(self) -> dict:
        return {
            "forward": self.forward.to_json() if self.forward else None,
            "inverse": self.inverse.to_json() if self.inverse else None,
            "pass": self.passed,
        }


@dataclass
class BlenderBuild:
    maps: list
    spec: BlendingRegionSpec
    certificates: BlendingCertificates
    forward_translates: np.ndarray = field(default=None)
    inverse_translates: np.ndarray = field(default=None)


def _dedupe_translates(groups):
    seen = []
    out = []
    for t in groups:
        key = tuple(np.round(t, 12))
        if key not in seen:
            seen.append(key)
            out.append(t)
    return out


def build_blending_region(phi: AffineMap, eps: float, kind: str,
                          safety: float = 0.8, grid: str = "odd",
                          h: float | None = None) -> BlenderBuild:
    """Translate family T_i . phi covering B = B_{eps/2}(fixed point); the map
    itself is the zero translate.  D = B_{3 eps/2} holds the isolating slack."""
    if eps <= 0.0:
        raise ParamError("eps must be positive")
    if not isinstance(phi, AffineMap):
        raise ParamError("the generating map must be affine")
    fp = hyperbolic_fixed_point(phi)
    if fp is None or not fp.hyperbolic:
        raise ParamError("the generating map needs a hyperbolic fixed point")
    c = phi.dim
    delta = eps / 2.0
    B = Region.ball(fp.point, delta)
    D = Region.ball(fp.point, 1.5 * eps)
    fwd = inv = None
    translates = []
    if kind in ("cs", "double"):
        fwd = lattice_translate_centers(delta, phi, safety=safety, grid=grid)
        translates.extend(fwd.centers)
    if kind in ("cu", "double"):
        inv = lattice_translate_centers(delta, AffineMap(phi._inv), safety=safety, grid=grid)
        # phi_k^{-1}(B) = phi^{-1}(B - t); the inverse-image translate c needs t = -L c
        translates.extend([-phi.linear @ cvec for cvec in inv.centers])
    if kind not in ("cs", "cu", "double"):
        raise ParamError(f"unknown blending kind {kind!r}")
    translates = _dedupe_translates([np.zeros(c)] + list(translates))
    maps = [AffineMap(phi.linear, phi.offset + t) for t in translates]
    spec = BlendingRegionSpec(
        B=B, D=D, symbols=list(range(1, len(maps) + 1)), kind=kind,
        cs_index=fp.s_index, cu_index=c - fp.s_index,
    )
    certs = verify_blending_region(maps, spec, h=h)
    if not certs.passed:
        raise ShapeError("constructed translate family failed its own cover check")
    return BlenderBuild(
        maps=maps, spec=spec, certificates=certs,
        forward_translates=fwd.centers if fwd else None,
        inverse_translates=inv.centers if inv else None,
    )


def verify_blending_region(maps, spec: BlendingRegionSpec,
                           h: float | None = None) -> BlendingCertificates:
    """Run the defining cover checks: forward for cs claims, inverse for cu,
    both for double."""
    forward = inverse = None
    if spec.kind in ("cs", "double"):
        forward = verify_open_cover(maps, spec.B, direction="forward", h=h)
    if spec.kind in ("cu", "double"):
        inverse = verify_open_cover(maps, spec.B, direction="inverse", h=h)
    return BlendingCertificates(forward=forward, inverse=inverse)


def blender_indices(maps, B: Region, tol: float = 1e-6) -> tuple[int, int]:
    """(cs_index, cu_index) from the singular values of the shared linear part
    evaluated at the center of B."""
    if not maps:
        raise ParamError("need at least one map")
    jacs = [m.jacobian(B.center) for m in maps]
    ref = jacs[0]
    scale = np.linalg.norm(ref, 2)
    for Jk in jacs[1:]:
        if np.linalg.norm(Jk - ref, 2) > 0.10 * scale:
            raise ParamError("maps do not share a common linear part within 10%")
    sv = np.linalg.svd(ref, compute_uv=False)
    if np.any(np.abs(sv - 1.0) <= tol):
        raise IndeterminateIndexError(
            "a singular value sits at the unit circle; indices are undefined")
    cs = int(np.sum(sv < 1.0))
    cu = int(np.sum(sv > 1.0))
    return cs, cu
