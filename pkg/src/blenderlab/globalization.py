"""Translation-semigroup coverage: spread a seed ball over compact targets.

Generators are local translation bumps glued over chart atlases.  The search
tracks balls conservatively: a ball whose unit-time travel stays inside a bump
plateau is translated exactly (no shrinking), a ball clear of the support is
fixed, and straddling balls are dropped rather than distorted, so every
recorded ball really lies in the semigroup image of the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .covers import simplex_directions, simplex_kappa
from .errors import BudgetError, ParamError
from .fibermaps import (AffineMap, BumpTranslation, CompositeMap,
                        DisjointUnionMap, FiberMap)
from .regions import Region


def local_translation_family(U0: Region, eps: float, scale: float = 1.0,
                             symplectic: bool | None = None,
                             steps: int = 16) -> list[BumpTranslation]:
    """c+1 simplex-direction bump translations: each one translates by
    delta*u_i on B_eps(U0) (delta = eps * kappa_c * 0.9 * scale) and is the
    identity outside B_2eps(U0)."""
    if eps <= 0.0:
        raise ParamError("eps must be positive")
    if not 0.0 <= scale <= 1.0:
        raise ParamError("scale must lie in [0, 1]")
    c = U0.dim
    if symplectic is None:
        symplectic = c % 2 == 0
    dirs = simplex_directions(c)
    delta = eps * simplex_kappa(dirs) * 0.9 * scale
    plateau = eps + 1.002 * delta
    return [
        BumpTranslation(U0, delta * u, plateau_pad=plateau, support_pad=2.0 * eps,
                        symplectic=symplectic, steps=steps)
        for u in dirs
    ]


@dataclass
class ChartAtlas:
    """eps-scale charts in color classes with pairwise disjoint supports, and
    one glued translation generator per (class, direction)."""

    generators: list
    charts: list
    chart_class: list
    eps: float
    delta: float
    n_classes: int
    directions: np.ndarray

    @property
    def s(self) -> int:
        return len(self.generators)

    def translation_zone(self, chart: Region) -> Region:
        return chart.inflate(self.eps)


def _chart_layout(domain: Region, eps: float):
    """Chart regions and their color classes for the domain box."""
    c = domain.dim
    lo, hi = domain.bounding_box()
    charts, colors = [], []
    if c == 1:
        r0 = 3.0 * eps
        a = (r0 + 2.0 * eps) * 1.05
        n = int(np.ceil((hi[0] - lo[0] + 2 * r0) / a)) + 1
        start = lo[0] - r0
        for i in range(n + 1):
            charts.append(Region.box([start + i * a], [r0]))
            colors.append(i % 2)
        return charts, colors, 2
    if c == 2:
        r0 = 2.5 * eps
        s = (2.0 * (r0 + 2.0 * eps) / np.sqrt(3.0)) * 1.01
        a1 = np.array([s, 0.0])
        a2 = np.array([0.5 * s, 0.5 * np.sqrt(3.0) * s])
        pad = r0 + eps
        imax = int(np.ceil((hi[0] - lo[0] + 2 * pad) / s)) + 3
        jmax = int(np.ceil((hi[1] - lo[1] + 2 * pad) / (a2[1]))) + 3
        origin = lo - pad
        for j in range(-1, jmax + 1):
            for i in range(-jmax - 1, imax + 1):
                center = origin + i * a1 + j * a2
                if np.any(center < lo - pad - s) or np.any(center > hi + pad + s):
                    continue
                charts.append(Region.ball(center, r0))
                colors.append((i - j) % 3)
        return charts, colors, 3
    # generic fallback: cubic lattice with parity classes (2^c of them)
    r0 = 8.0 * eps
    a = (r0 + 2.0 * eps) * 1.05
    axes = []
    for k in range(c):
        n = int(np.ceil((hi[k] - lo[k] + 2 * r0) / a)) + 1
        axes.append(lo[k] - r0 + a * np.arange(n + 1))
    import itertools
    for combo in itertools.product(*(range(len(ax)) for ax in axes)):
        center = np.array([axes[k][combo[k]] for k in range(c)])
        charts.append(Region.box(center, np.full(c, r0)))
        colors.append(sum((combo[k] % 2) << k for k in range(c)))
    return charts, colors, 2 ** c


def chart_family_globalization(domain: Region, eps: float, scale: float = 1.0,
                               symplectic: bool | None = None,
                               steps: int = 16) -> ChartAtlas:
    """Glued translation families over an atlas of eps-scale charts: one
    generator per (color class, simplex direction), so s = n_classes * (c+1).

    Same-class supports are verified disjoint at construction, which is what
    makes the per-class gluing well defined.
    """
    c = domain.dim
    if symplectic is None:
        symplectic = c % 2 == 0
    charts, colors, n_classes = _chart_layout(domain, eps)
    dirs = simplex_directions(c)
    delta = eps * simplex_kappa(dirs) * 0.9 * scale
    families = [local_translation_family(ch, eps, scale=scale,
                                         symplectic=symplectic, steps=steps)
                for ch in charts]
    generators = []
    for k in range(n_classes):
        members_k = [i for i, col in enumerate(colors) if col == k]
        if not members_k:
            continue
        for d in range(len(dirs)):
            generators.append(DisjointUnionMap([families[i][d] for i in members_k]))
    return ChartAtlas(generators=generators, charts=charts, chart_class=colors,
                      eps=eps, delta=delta, n_classes=n_classes, directions=dirs)


# ---------------------------------------------------------------------------
# batched conservative ball transport
# ---------------------------------------------------------------------------


def _transport_batch(gen: FiberMap, centers: np.ndarray, radii: np.ndarray,
                     inverse: bool = False):
    """(new_centers, new_radii, valid) for a batch of balls; invalid entries
    are straddling balls we refuse to bound."""
    n = centers.shape[0]
    if isinstance(gen, AffineMap):
        sv = gen.singular_values()
        if inverse:
            return gen.apply_inverse(centers), radii / sv[0], np.ones(n, bool)
        return gen.apply(centers), radii * sv[-1], np.ones(n, bool)
    if isinstance(gen, BumpTranslation):
        d = gen.core.distance_to_set(centers)
        vec = -gen.vector if inverse else gen.vector
        exact = d + radii + gen.speed * 1.001 <= gen.plateau_pad
        outside = d - radii >= gen.support_pad
        out_c = np.where(exact[:, None], centers + vec, centers)
        straddle = ~(exact | outside)
        D = gen.displacement_bound()
        out_r = np.where(straddle, radii - D, radii)
        valid = out_r > 0.0
        return out_c, out_r, valid
    if isinstance(gen, DisjointUnionMap):
        out_c = centers.copy()
        out_r = radii.copy()
        valid = np.ones(n, bool)
        touched = np.zeros(n, int)
        for m, sup in zip(gen.members, gen._supports):
            mask = sup.depth(centers) > -radii
            touched += mask.astype(int)
            if np.any(mask):
                c2, r2, ok = _transport_batch(m, centers[mask], radii[mask], inverse)
                out_c[mask] = c2
                out_r[mask] = r2
                valid[mask] &= ok
        valid &= touched <= 1
        return out_c, out_r, valid
    if isinstance(gen, CompositeMap):
        out_c, out_r = centers.copy(), radii.copy()
        valid = np.ones(n, bool)
        for m in gen.maps:
            out_c, out_r, ok = _transport_batch(m, out_c, out_r, inverse)
            valid &= ok
        return out_c, out_r, valid
    out_c = np.empty_like(centers)
    out_r = np.empty_like(radii)
    valid = np.ones(n, bool)
    for i in range(n):
        out_c[i], out_r[i], ok = gen.transport_ball(centers[i], radii[i])
        valid[i] = ok
    return out_c, out_r, valid


def _gen_step(g) -> float:
    """Dominant translation step of one generator (0 when undefined)."""
    if isinstance(g, AffineMap):
        if np.linalg.norm(g.linear - np.eye(g.dim)) < 1e-12:
            return float(np.linalg.norm(g.offset))
        return 0.0
    if isinstance(g, BumpTranslation):
        return g.speed
    if isinstance(g, DisjointUnionMap):
        speeds = [m.speed for m in g.members if m.speed > 0]
        return min(speeds) if speeds else 0.0
    if isinstance(g, CompositeMap):
        parts = [_gen_step(m) for m in g.maps]
        parts = [p for p in parts if p > 0]
        return max(parts) if parts else 0.0
    return 0.0


def _generator_step_scale(gens) -> float:
    scales = [s for s in (_gen_step(g) for g in gens) if s > 0]
    return min(scales) if scales else 0.0


@dataclass
class SemigroupRun:
    covered: bool
    witness_words: list
    uncovered: list
    n_states: int
    layers: int
    layer_reach: list = field(default_factory=list)
    direction: str = "forward"
    max_word_len: int = 0
    budget_hit: bool = False
    ball_centers: np.ndarray = field(default=None)
    ball_radii: np.ndarray = field(default=None)

    def to_json(self) -> dict:
        return {
            "covered": self.covered,
            "witness_words": [list(w) if w is not None else None
                              for w in self.witness_words],
            "uncovered": [list(map(float, p)) for p in self.uncovered],
            "n_states": self.n_states,
            "layers": self.layers,
            "layer_reach": self.layer_reach,
            "direction": self.direction,
            "max_word_len": self.max_word_len,
            "budget_hit": self.budget_hit,
        }


def semigroup_coverage(gens, seed: Region, target_net, max_word_len: int,
                       direction: str = "forward", node_budget: int = 400_000,
                       dedup_cell: float | None = None,
                       min_radius_factor: float = 0.55) -> SemigroupRun:
    """Breadth-first expansion of the generator semigroup acting on the seed
    ball; covered iff every target point lies strictly inside some recorded
    ball.  Witness words are generator indices (1-based), innermost first."""
    if max_word_len < 1:
        raise ParamError("max_word_len must be at least 1")
    if seed.kind != "ball":
        raise ParamError("the seed region must be a ball")
    if direction not in ("forward", "backward"):
        raise ParamError(f"unknown direction {direction!r}")
    inverse = direction == "backward"
    targets = np.atleast_2d(np.asarray(target_net, dtype=float))
    n_targets = targets.shape[0]
    step = _generator_step_scale(gens)
    if dedup_cell is None:
        dedup_cell = (step / 2.0) if step > 0 else seed.radius / 2.0
    min_radius = seed.radius * min_radius_factor

    lo = np.minimum(targets.min(axis=0), seed.center) - 4 * seed.radius - 4 * dedup_cell
    hi = np.maximum(targets.max(axis=0), seed.center) + 4 * seed.radius + 4 * dedup_cell

    centers = [seed.center.copy()]
    radii = [seed.radius]
    parents = [-1]
    gen_of = [0]
    # per-cell best radius seen so far; fatter balls may re-enter a cell so a
    # shrunken straddler cannot poison the search
    seen = {tuple(np.floor(seed.center / dedup_cell).astype(int)): seed.radius}

    covered_by = np.full(n_targets, -1, dtype=int)
    d0 = np.linalg.norm(targets - seed.center, axis=1)
    covered_by[d0 < seed.radius] = 0

    frontier = np.array([0])
    layer_reach = [float(seed.radius)]
    layers_done = 0
    budget_hit = False

    def reconstruct(state: int):
        word = []
        while state > 0:
            word.append(gen_of[state])
            state = parents[state]
        return list(reversed(word))

    for layer in range(1, max_word_len + 1):
        if frontier.size == 0 or np.all(covered_by >= 0):
            break
        cen_arr = np.array([centers[i] for i in frontier])
        rad_arr = np.array([radii[i] for i in frontier])
        new_indices = []
        for gi, g in enumerate(gens, start=1):
            nc, nr, ok = _transport_batch(g, cen_arr, rad_arr, inverse)
            ok = ok & (nr >= min_radius)
            ok &= np.all((nc >= lo) & (nc <= hi), axis=1)
            moved = np.linalg.norm(nc - cen_arr, axis=1) > 1e-15
            ok &= moved
            for j in np.flatnonzero(ok):
                key = tuple(np.floor(nc[j] / dedup_cell).astype(int))
                best = seen.get(key)
                if best is not None and nr[j] <= 1.25 * best:
                    continue
                seen[key] = nr[j]
                centers.append(nc[j])
                radii.append(float(nr[j]))
                parents.append(int(frontier[j]))
                gen_of.append(gi)
                new_indices.append(len(centers) - 1)
        layers_done = layer
        if new_indices:
            new_c = np.array([centers[i] for i in new_indices])
            new_r = np.array([radii[i] for i in new_indices])
            open_targets = np.flatnonzero(covered_by < 0)
            if open_targets.size:
                dist = np.linalg.norm(
                    targets[open_targets][:, None, :] - new_c[None, :, :], axis=2)
                hit = dist < new_r[None, :]
                for row, t_idx in enumerate(open_targets):
                    js = np.flatnonzero(hit[row])
                    if js.size:
                        covered_by[t_idx] = new_indices[js[0]]
        all_c = np.array(centers)
        all_r = np.array(radii)
        layer_reach.append(float(np.max(np.linalg.norm(all_c - seed.center, axis=1) + all_r)))
        frontier = np.array(new_indices, dtype=int)
        if len(centers) > node_budget:
            budget_hit = True
            break

    covered = bool(np.all(covered_by >= 0))
    witness_words = [reconstruct(int(s)) if s >= 0 else None for s in covered_by]
    uncovered = [targets[i] for i in np.flatnonzero(covered_by < 0)]
    run = SemigroupRun(
        covered=covered, witness_words=witness_words, uncovered=uncovered,
        n_states=len(centers), layers=layers_done, layer_reach=layer_reach,
        direction=direction, max_word_len=max_word_len, budget_hit=budget_hit,
        ball_centers=np.array(centers), ball_radii=np.array(radii),
    )
    if budget_hit and not covered:
        raise BudgetError("semigroup search exceeded its node budget", partial=run)
    return run


def replay_word(gens, word, point, direction: str = "forward") -> np.ndarray:
    """Apply the generator word (innermost first) to a point with the actual
    maps, not the ball arithmetic."""
    x = np.asarray(point, dtype=float)
    for gi in word:
        g = gens[gi - 1]
        x = g.apply_inverse(x) if direction == "backward" else g.apply(x)
    return x


def check_RT_condition(sys, B0: Region, K_net, n_max: int,
                       direction: str = "forward",
                       node_budget: int = 400_000) -> tuple[bool, SemigroupRun]:
    """True iff the semigroup orbit of B0 under all fiber maps covers the
    target net with positive margin within n_max steps."""
    run = semigroup_coverage(sys.maps, B0, K_net, n_max, direction=direction,
                             node_budget=node_budget)
    return run.covered, run
