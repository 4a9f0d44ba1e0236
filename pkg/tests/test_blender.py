import numpy as np
import pytest

from blenderlab.blender import (BlendingRegionSpec, blender_indices,
                                build_blending_region, verify_blending_region)
from blenderlab.covers import audit_cover_soundness
from blenderlab.errors import (IndeterminateIndexError, ParamError, ShapeError)
from blenderlab.fibermaps import AffineMap
from blenderlab.regions import Region
from blenderlab.skewproduct import OneStepSystem, perturb_system


def test_build_contracting_blender():
    build = build_blending_region(AffineMap(np.diag([0.5, 0.5])), 1.0, "cs")
    assert len(build.maps) == 9
    assert build.spec.kind == "cs"
    assert build.spec.cs_index == 2 and build.spec.contracting
    assert build.certificates.passed
    assert build.certificates.forward.margin > 0.0
    assert audit_cover_soundness(build.maps, build.spec.B, "forward",
                                 n_points=20_000) == 0


def test_build_double_blender_saddle():
    build = build_blending_region(AffineMap(np.diag([0.5, 2.0])), 1.0, "double")
    assert (build.spec.cs_index, build.spec.cu_index) == (1, 1)
    assert build.certificates.forward.passed
    assert build.certificates.inverse.passed
    # forward translates live on the contracted axis, inverse on the expanding
    assert np.max(np.abs(np.array(build.forward_translates)[:, 1])) == 0.0
    assert np.max(np.abs(np.array(build.inverse_translates)[:, 0])) == 0.0
    assert audit_cover_soundness(build.maps, build.spec.B, "inverse",
                                 n_points=20_000) == 0


def test_build_rejects_pure_expansion_for_cs():
    with pytest.raises(ShapeError):
        build_blending_region(AffineMap(np.diag([2.0, 2.0])), 1.0, "cs")


def test_verify_blending_region_round_trip_and_failures():
    build = build_blending_region(AffineMap(np.diag([0.5, 0.5])), 1.0, "cs")
    again = verify_blending_region(build.maps, build.spec)
    assert again.passed and again.margin > 0.0

    # doubling the translation lengths tears the cover open
    doubled = [build.maps[0]] + [
        AffineMap(m.linear, 2.0 * (m.offset - build.maps[0].offset) + build.maps[0].offset)
        for m in build.maps[1:]
    ]
    torn = verify_blending_region(doubled, build.spec)
    assert not torn.passed
    assert len(torn.forward.witness_failures) > 0

    single = verify_blending_region([build.maps[0]], build.spec)
    assert not single.passed


def test_spec_validation():
    B = Region.ball([0.0, 0.0], 0.5)
    D = Region.ball([0.0, 0.0], 1.5)
    spec = BlendingRegionSpec(B=B, D=D, symbols=[1], kind="cs", cs_index=2, cu_index=0)
    assert spec.contracting and not spec.expanding
    with pytest.raises(ParamError):
        BlendingRegionSpec(B=D, D=B, symbols=[1], kind="cs", cs_index=2, cu_index=0)
    with pytest.raises(ParamError):
        BlendingRegionSpec(B=B, D=D, symbols=[1], kind="double", cs_index=2, cu_index=0)


def test_blender_indices_examples():
    B = Region.ball([0.0, 0.0], 1.0)
    mk = lambda d, t: AffineMap(np.diag(d), t)
    assert blender_indices([mk([0.5, 2.0], [0, 0]), mk([0.5, 2.0], [0.1, 0])], B) == (1, 1)
    assert blender_indices([mk([1 / 3, 0.5], [0, 0])], B) == (2, 0)
    assert blender_indices([mk([2.0, 3.0], [0, 0])], B) == (0, 2)
    with pytest.raises(IndeterminateIndexError):
        blender_indices([mk([1.0, 2.0], [0, 0])], B)
    with pytest.raises(ParamError):
        blender_indices([mk([0.5, 2.0], [0, 0]), mk([0.9, 2.0], [0, 0])], B)


def test_index_arithmetic():
    B = Region.ball([0.0, 0.0, 0.0], 1.0)
    for diag in ([0.5, 0.7, 2.0], [0.2, 3.0, 4.0], [0.1, 0.2, 0.3]):
        cs, cu = blender_indices([AffineMap(np.diag(diag))], B)
        assert cs + cu == 3


def test_cover_robust_under_small_perturbations():
    build = build_blending_region(AffineMap(np.diag([0.5, 2.0])), 1.0, "double")
    margin = build.certificates.margin
    L = max(m.lipschitz_inverse() for m in build.maps)
    eta = 0.9 * margin / (2.0 * L)
    sys = OneStepSystem(build.maps, nu=0.2,
                        domain=Region.box([0.0, 0.0], [1.5, 1.5]))
    for seed in range(20):
        pert = perturb_system(sys, eta, seed=seed, symplectic=False)
        certs = verify_blending_region(pert.maps, build.spec, h=0.012)
        assert certs.passed, f"seed {seed} broke the cover"
