"""Acceptance suite: one test per criterion, each printing a verdict line.

Criterion 3 has a genuinely unattainable sub-case (the c=1 translate pair at
delta = eps*kappa_1 covers everything except the center, so a sound checker
must reject it); that sub-case is kept as a strict xfail and documented in the
decisions ledger.
"""

import json

import numpy as np
import pytest

from blenderlab.covers import (audit_cover_soundness, cover_ball_by_translates,
                               simplex_directions, simplex_kappa)
from blenderlab.fibermaps import AffineMap
from blenderlab.grassmann import (grassmann_distance, lift_map,
                                  tangency_codimension)
from blenderlab.pipeline import (PipelineConfig, build_arc_system, certify,
                                 max_symplectic_defect, robustness_sweep)
from blenderlab.regions import Region
from blenderlab.skewproduct import (HolderTranslationSystem, OneStepSystem,
                                    Word, strong_stable_holonomy)
from blenderlab.symplectic import PlaneFrame


def report(criterion, passed, detail=""):
    print(f"[criterion {criterion}] {'PASS' if passed else 'FAIL'}: {detail}")
    assert passed, detail


# ---------------------------------------------------------------------------
# 1. flagship pipeline
# ---------------------------------------------------------------------------


def test_criterion_1_flagship(flagship_config, flagship_certificate):
    cert = flagship_certificate
    runtime = cert.provenance["runtime_seconds"]
    assert flagship_config.nu == 0.2
    ok = cert.overall_pass
    named = {
        "double_blending_cover_site1",
        "cu_blending_cover_site2",
        "tangency_product_cover_site1",
        "tangency_product_cover_site2",
        "transition_witness",
        "globalization_forward",
        "globalization_backward",
        "partial_hyperbolicity",
        "hyperbolic_fixed_point_in_blending_region",
    }
    for name in named:
        ok = ok and cert.check(name).status == "pass"
    ok = ok and cert.check("tangency_product_cover_site1").parameters["n_lifted"] == 20
    ok = ok and cert.check("transition_witness").parameters["length"] <= 5
    for c in cert.checks:
        if c.required and c.status == "pass" and c.margin is not None:
            ok = ok and c.margin > 0.0
    ok = ok and runtime <= 60.0
    report(1, ok, f"overall={cert.overall_pass} runtime={runtime:.1f}s "
                  f"n_lifted={cert.check('tangency_product_cover_site1').parameters['n_lifted']}")


# ---------------------------------------------------------------------------
# 2. cover soundness at 1e5 points
# ---------------------------------------------------------------------------


def test_criterion_2_cover_soundness(flagship_build):
    build = flagship_build
    sysm = build.system.maps
    fam1 = [sysm[i - 1] for i in ([build.base_map_symbol]
                                  + build.site1_product_symbols
                                  + build.site1_inverse_symbols)]
    fam2 = [sysm[i - 1] for i in build.site2_symbols]
    families = [
        (fam1, build.blend1_spec.B, "forward"),
        (fam1, build.blend1_spec.B, "inverse"),
        (fam2, build.blend2_spec.B, "inverse"),
    ]
    for A in build.tangency1.rotations:
        families.append((build.tangency1.lifted_base_maps(A),
                         build.tangency1.base_region, "forward"))
    total_missed = 0
    for k, (maps, B, direction) in enumerate(families):
        total_missed += audit_cover_soundness(maps, B, direction,
                                              n_points=100_000, seed=k)
    report(2, total_missed == 0,
           f"{len(families)} passing cover families, "
           f"{total_missed} misses out of {len(families)}x100000 points")


# ---------------------------------------------------------------------------
# 3. simplex constant and the translate-cover threshold
# ---------------------------------------------------------------------------


def test_criterion_3_simplex_constant():
    ok = True
    for c in range(1, 7):
        kappa = simplex_kappa(simplex_directions(c))
        ok = ok and abs(kappa - 1.0 / c) <= 1e-6
    for c in (2, 3):
        dirs = simplex_directions(c)
        kappa = simplex_kappa(dirs)
        h = 1.0 / 40 if c < 3 else 1.0 / 25
        ok = ok and cover_ball_by_translates(1.0, kappa, dirs, h=h).passed
    for c in (1, 2, 3):
        dirs = simplex_directions(c)
        kappa = simplex_kappa(dirs)
        h = 1.0 / 40 if c < 3 else 1.0 / 25
        ok = ok and not cover_ball_by_translates(1.0, 3 * kappa, dirs, h=h).passed
    report(3, ok, "kappa_c = 1/c to 1e-6 for c<=6; pass at eps*kappa (c=2,3); "
                  "fail at 3*eps*kappa (c=1,2,3); c=1 pass sub-case is a "
                  "documented spec defect (strict xfail below)")


@pytest.mark.xfail(strict=True,
                   reason="spec defect: at c=1, delta = eps*kappa_1 = eps "
                          "leaves the center on the boundary of both open "
                          "images, so the sound checker rejects the cover")
def test_criterion_3_c1_pass_subcase():
    dirs = simplex_directions(1)
    cert = cover_ball_by_translates(1.0, simplex_kappa(dirs), dirs, h=1.0 / 40)
    print(f"[criterion 3, c=1 sub-case] {'PASS' if cert.passed else 'FAIL'}: "
          f"margin={cert.margin:.4f}")
    assert cert.passed


# ---------------------------------------------------------------------------
# 4. codimension arithmetic, exhaustive for c <= 6
# ---------------------------------------------------------------------------


def test_criterion_4_codimension_arithmetic():
    checked = 0
    for c in range(2, 7):
        for ind_cu_1 in range(1, c):
            for ind_cs_2 in range(1, c):
                for ell in range(1, c + 1):
                    rep = tangency_codimension(ind_cu_1, ind_cs_2, ell, c)
                    assert rep.c_T == c - (ind_cu_1 + ind_cs_2 - ell)
                    i1, i2 = c - ind_cu_1, ind_cs_2
                    expected = max(0, i2 - i1) < ell <= min(c - i1, i2)
                    assert rep.admissible == expected
                    assert ell == ind_cu_1 + ind_cs_2 - c + rep.c_T
                    checked += 1
    report(4, True, f"{checked} integer cases agree exactly")


# ---------------------------------------------------------------------------
# 5. symplectic defects
# ---------------------------------------------------------------------------


def test_criterion_5_symplectic_defects(flagship_config, flagship_build):
    worst = max_symplectic_defect(flagship_build.system.maps,
                                  flagship_config.domain(), samples=100,
                                  seed=flagship_config.seed)
    control = max_symplectic_defect([AffineMap(np.diag([1.2, 1.2]))],
                                    flagship_config.domain(), samples=10)
    ok = worst <= 1e-8 and control >= 1e-2
    report(5, ok, f"max defect over {flagship_build.system.d} maps x 100 points: "
                  f"{worst:.2e}; non-symplectic control rejected at {control:.2e}")


# ---------------------------------------------------------------------------
# 6. Grassmannian contraction rates
# ---------------------------------------------------------------------------


def test_criterion_6_grassmann_contraction():
    lm = lift_map(AffineMap(np.diag([2.0, 0.5])))
    rng = np.random.default_rng(0)
    ok = True
    for _ in range(100):
        t = rng.uniform(-0.6, 0.6)
        if abs(t) < 1e-3:
            continue
        E = PlaneFrame.from_spanning(np.array([1.0, t]))
        _, img = lm.apply(np.zeros(2), E)
        slope = img.frame[1, 0] / img.frame[0, 0]
        ok = ok and abs(t / slope - 4.0) <= 0.04
    # c = 4 dominated splitting: convergence rate sigma_3/sigma_2 within 10%
    L = np.diag([3.0, 2.0, 0.5, 1.0 / 3.0])
    lm4 = lift_map(AffineMap(L))
    base = PlaneFrame(np.eye(4)[:, :2])
    q = 0.25
    ratios = []
    for _ in range(100):
        E = PlaneFrame.from_spanning(base.frame + 0.2 * rng.standard_normal((4, 2)))
        for _ in range(7):
            _, E = lm4.apply(np.zeros(4), E)
        a0 = grassmann_distance(E, base)
        _, E = lm4.apply(np.zeros(4), E)
        if a0 > 1e-9:
            ratios.append(grassmann_distance(E, base) / a0)
    med = float(np.median(ratios))
    ok = ok and abs(med - q) <= 0.1 * q
    report(6, ok, f"slope contraction 4.0 within 1% over 100 lines; "
                  f"c=4 rate median {med:.4f} vs {q}")


# ---------------------------------------------------------------------------
# 7. robustness margins
# ---------------------------------------------------------------------------


def test_criterion_7_robustness_window(flagship_config, flagship_build,
                                       flagship_certificate):
    cert = flagship_certificate
    margins = [cert.check("double_blending_cover_site1").margin,
               cert.check("cu_blending_cover_site2").margin,
               cert.check("tangency_product_cover_site1").margin,
               cert.check("tangency_product_cover_site2").margin]
    m = min(margins)
    fam = flagship_build.site1_family() + flagship_build.site2_maps()
    L = max(mp.lipschitz_inverse() for mp in fam)
    eta_small = m / (4.0 * L)
    eta_large = 10.0 * m
    table_small = robustness_sweep(flagship_config, [eta_small], trials=20,
                                   build=flagship_build)
    row = table_small.rows[0]
    ok = row.passes == row.trials
    table_large = robustness_sweep(flagship_config, [eta_large], trials=5,
                                   build=flagship_build)
    row_l = table_large.rows[0]
    ok = ok and row_l.passes < row_l.trials
    report(7, ok, f"m={m:.4f} L={L:.2f}: eta={eta_small:.2e} -> "
                  f"{row.passes}/{row.trials} pass; eta={eta_large:.2e} -> "
                  f"{row_l.trials - row_l.passes}/{row_l.trials} trials fail "
                  f"({sorted(set(row_l.failed_checks))[:3]}...)")


# ---------------------------------------------------------------------------
# 8. holonomy decay
# ---------------------------------------------------------------------------


def test_criterion_8_holonomy_decay():
    sys = HolderTranslationSystem(dimension=2, d=3, nu=0.5, alpha=1.0, window=32)
    xi = Word.from_map({i: 1 for i in range(-32, 0)}, radius=32, default=1)
    zeta = Word.from_map({i: 2 for i in range(-32, 0)}, radius=32, default=1)
    x = np.zeros(2)
    ref = strong_stable_holonomy(sys, xi, zeta, x, 16).point
    e4 = np.linalg.norm(strong_stable_holonomy(sys, xi, zeta, x, 4).point - ref)
    e8 = np.linalg.norm(strong_stable_holonomy(sys, xi, zeta, x, 8).point - ref)
    ratio = e8 / e4
    ok = abs(ratio - 0.5 ** 4) <= 0.2 * 0.5 ** 4

    one_step = OneStepSystem([AffineMap(np.array([[0.5]])),
                              AffineMap(np.array([[0.5]]), [0.5])], nu=0.5, window=8)
    res = strong_stable_holonomy(one_step, Word.constant(1, 8),
                                 Word.from_map({-2: 2}, radius=8), np.array([0.3]), 5)
    ok = ok and res.point == pytest.approx(0.3) and res.error_bound == 0.0
    report(8, ok, f"truncation ratio depth 8/4 = {ratio:.5f} vs 2^-4 = 0.0625; "
                  f"one-step holonomy exact")


# ---------------------------------------------------------------------------
# 9. arc endpoint and monotone approach to the identity
# ---------------------------------------------------------------------------


def test_criterion_9_arc_endpoint():
    rng = np.random.default_rng(0)
    pts = rng.uniform(0.0, 3.0, size=(150, 2))
    sups = []
    for eps in (0.0, 0.05, 0.1, 0.25, 0.5):
        cfg = PipelineConfig(eps=eps, target_spacing=0.75)
        build = build_arc_system(cfg)
        sups.append(max(m.displacement_on(pts) for m in build.system.maps))
    ok = sups[0] == 0.0
    ok = ok and all(a <= b for a, b in zip(sups, sups[1:]))
    report(9, ok, "sup-distances over eps in {0, 0.05, 0.1, 0.25, 0.5}: "
                  + ", ".join(f"{s:.4f}" for s in sups))


# ---------------------------------------------------------------------------
# 10. determinism
# ---------------------------------------------------------------------------


def test_criterion_10_determinism():
    cfg = PipelineConfig(target_spacing=0.75, ph_samples=12, defect_samples=16)
    a = certify(cfg).dumps(strip_timestamp=True)
    b = certify(cfg).dumps(strip_timestamp=True)
    ok = a == b
    report(10, ok, f"two runs produce byte-identical certificates "
                   f"({len(a)} bytes, timestamp excluded)")
