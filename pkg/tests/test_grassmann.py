import numpy as np
import pytest

from blenderlab.covers import lattice_translate_centers
from blenderlab.errors import ParamError, SubspaceClassError
from blenderlab.fibermaps import AffineMap
from blenderlab.grassmann import (ConeSpec, TangencyBlendingSpec,
                                  build_tangency_rotations, find_transition,
                                  grassmann_distance, lift_map,
                                  plane_from_graph, tangency_codimension,
                                  verify_tangency_blending,
                                  verify_unstable_cone)
from blenderlab.regions import Region
from blenderlab.symplectic import PlaneFrame

E1 = PlaneFrame(np.array([[1.0], [0.0]]))
E2 = PlaneFrame(np.array([[0.0], [1.0]]))


def test_lift_map_examples():
    lm = lift_map(AffineMap(np.diag([2.0, 0.5])))
    _, img = lm.apply(np.zeros(2), E1)
    assert grassmann_distance(img, E1) <= 1e-12  # invariant axis

    # slope recursion t -> t/4, exact for the diagonal model
    for t in (0.3, -0.2, 1.5):
        E = PlaneFrame.from_spanning(np.array([1.0, t]))
        _, img = lm.apply(np.zeros(2), E)
        slope = img.frame[1, 0] / img.frame[0, 0]
        assert slope == pytest.approx(t / 4.0)

    # functoriality on diagonal maps: lift(L)^2 = lift(L^2)
    lm2 = lift_map(AffineMap(np.diag([4.0, 0.25])))
    E = PlaneFrame.from_spanning(np.array([1.0, 0.7]))
    _, once = lm.apply(*lm.apply(np.zeros(2), E))
    _, twice = lm2.apply(np.zeros(2), E)
    assert grassmann_distance(once, twice) <= 1e-12


def test_grassmann_distance_examples():
    assert grassmann_distance(E1, E2) == pytest.approx(np.pi / 2)
    assert grassmann_distance(E1, E1) == 0.0
    tilted = PlaneFrame.from_spanning(np.array([1.0, 0.1]))
    assert grassmann_distance(E1, tilted) == pytest.approx(np.arctan(0.1))


def test_verify_unstable_cone_examples():
    R = Region.ball([0.0, 0.0], 0.5)
    saddle = AffineMap(np.diag([2.0, 0.5]))
    good = verify_unstable_cone([saddle], ConeSpec(E1, 0.5, "uu", 1.8), R)
    assert good.passed
    assert good.max_image_opening == pytest.approx(0.125, abs=1e-6)
    assert good.min_expansion == pytest.approx(1.803, abs=2e-3)

    wide = verify_unstable_cone([saddle], ConeSpec(E1, 3.0, "uu", 2.0), R)
    assert not wide.passed
    assert wide.min_expansion == pytest.approx(0.79, abs=0.01)

    ident = verify_unstable_cone([AffineMap.identity(2)],
                                 ConeSpec(E1, 0.5, "uu", 1.1), R)
    assert not ident.passed


def test_cone_attraction_rate():
    # induced plane map contracts toward the dominant axis by sigma2/sigma1
    lm = lift_map(AffineMap(np.diag([2.0, 0.5])))
    rng = np.random.default_rng(0)
    for _ in range(100):
        t = rng.uniform(-1.0, 1.0)
        E = PlaneFrame.from_spanning(np.array([1.0, t]))
        for _ in range(3):  # settle into the small-angle regime
            _, E = lm.apply(np.zeros(2), E)
        a0 = grassmann_distance(E, E1)
        _, E = lm.apply(np.zeros(2), E)
        a1 = grassmann_distance(E, E1)
        if a0 > 1e-14:
            assert abs(a1 / a0 - 0.25) <= 0.025


def test_cone_attraction_rate_c4():
    L = np.diag([3.0, 2.0, 0.5, 1.0 / 3.0])
    lm = lift_map(AffineMap(L))
    base = PlaneFrame(np.eye(4)[:, :2])
    q = 0.5 / 2.0
    rng = np.random.default_rng(1)
    ratios = []
    for _ in range(100):
        E = PlaneFrame.from_spanning(base.frame + 0.2 * rng.standard_normal((4, 2)))
        # settle until the slowest contraction channel dominates the angle
        for _ in range(7):
            _, E = lm.apply(np.zeros(4), E)
        a0 = grassmann_distance(E, base)
        _, E = lm.apply(np.zeros(4), E)
        a1 = grassmann_distance(E, base)
        if a0 > 1e-9:
            ratios.append(a1 / a0)
    ratios = np.array(ratios)
    # never slower than the spectral rate; planes whose slow-mode coefficient
    # vanishes contract faster, so the rate match is a bulk statement
    assert np.all(ratios <= q * 1.1)
    assert abs(np.median(ratios) - q) <= 0.1 * q
    assert np.mean(np.abs(ratios - q) <= 0.1 * q) >= 0.9


def test_plane_operations_frame_independent():
    rng = np.random.default_rng(2)
    lm = lift_map(AffineMap(np.diag([3.0, 2.0, 0.5, 1.0 / 3.0])))
    for _ in range(10):
        V = rng.standard_normal((4, 2))
        E = PlaneFrame.from_spanning(V)
        O, _ = np.linalg.qr(rng.standard_normal((2, 2)))
        E2 = PlaneFrame(E.frame @ O)
        _, img1 = lm.apply(np.zeros(4), E)
        _, img2 = lm.apply(np.zeros(4), E2)
        assert grassmann_distance(img1, img2) <= 1e-9


def test_build_tangency_rotations_flagship():
    rot = build_tangency_rotations(np.diag([2.0, 0.5]), 1, 0.4)
    assert len(rot.rotations) == 5
    assert rot.contraction == pytest.approx(0.25)
    assert rot.certificate.passed
    assert rot.certificate.margin > 0.0
    assert grassmann_distance(rot.cap_base, E1) <= 1e-12
    # removing the rotations breaks the plane cover
    from blenderlab.grassmann import verify_plane_cover
    single = verify_plane_cover([np.diag([2.0, 0.5])], rot.cap_base, 0.4)
    assert not single.passed


def test_tangency_rotation_class_gate():
    # dominant 2-plane span(x1, y1) of a diagonal model with top rates on
    # those axes: symplectic class accepted
    L = np.zeros((4, 4))
    L[0, 0], L[1, 1], L[2, 2], L[3, 3] = 3.0, 1.2, 2.5, 0.8  # (x1,x2,y1,y2)
    rot = build_tangency_rotations(L, 2, 0.2, h_plane=0.2)
    assert grassmann_distance(rot.cap_base,
                              PlaneFrame(np.eye(4)[:, [0, 2]])) <= 1e-9
    # an odd-dimensional dominant plane below c/2 is isotropic, never
    # coisotropic, so the odd-ell gate rejects it
    with pytest.raises(SubspaceClassError):
        build_tangency_rotations(np.diag([3.0, 1.5, 1 / 3.0, 2 / 3.0]), 1, 0.2)


def flagship_spec(direction="cs"):
    site = np.array([1.0, 1.0])
    Lam = np.diag([2.0, 0.5])
    rot = build_tangency_rotations(Lam, 1, 0.4)
    lat = lattice_translate_centers(0.25, AffineMap(Lam), safety=0.78, grid="even")
    cone = ConeSpec(rot.cap_base, float(np.tan(0.7)), "uu", 1.5)
    if direction == "cs":
        rotations, translates = rot.rotations, lat.centers
    else:
        lat_inv = lattice_translate_centers(0.25, AffineMap(np.linalg.inv(Lam)),
                                            safety=0.78, grid="even")
        rotations = [np.eye(2)]
        translates = np.array([-Lam @ c for c in lat_inv.centers])
    return TangencyBlendingSpec(
        base_region=Region.ball(site, 0.25), cap_base=rot.cap_base,
        cap_radius=0.4, ell=1, base_linear=Lam, site_center=site,
        rotations=rotations, base_translates=translates,
        direction=direction, cone=cone)


def test_verify_tangency_blending_product():
    spec = flagship_spec("cs")
    assert spec.n_lifted == 20
    cert = verify_tangency_blending(spec, h_base=0.003, h_plane=0.002)
    assert cert.passed and cert.margin > 0.0

    cu = flagship_spec("cu")
    cert_cu = verify_tangency_blending(cu, h_base=0.003, h_plane=0.002)
    assert cert_cu.passed


def test_tangency_blending_failure_modes():
    spec = flagship_spec("cs")
    # rotations removed: the plane factor cannot cover the cap
    no_rot = TangencyBlendingSpec(
        base_region=spec.base_region, cap_base=spec.cap_base,
        cap_radius=spec.cap_radius, ell=1, base_linear=spec.base_linear,
        site_center=spec.site_center, rotations=[np.eye(2)],
        base_translates=spec.base_translates, direction="cs", cone=spec.cone)
    cert = verify_tangency_blending(no_rot, h_base=0.003, h_plane=0.002)
    assert not cert.passed and not cert.plane_certificate.passed

    # base translates removed: the base factor cannot cover the region
    no_trans = TangencyBlendingSpec(
        base_region=spec.base_region, cap_base=spec.cap_base,
        cap_radius=spec.cap_radius, ell=1, base_linear=spec.base_linear,
        site_center=spec.site_center, rotations=spec.rotations,
        base_translates=np.zeros((1, 2)), direction="cs", cone=spec.cone)
    cert = verify_tangency_blending(no_trans, h_base=0.003, h_plane=0.002)
    assert not cert.passed
    assert any(not c.passed for c in cert.base_certificates)


def test_cap_must_sit_inside_cone():
    spec = flagship_spec("cs")
    with pytest.raises(ParamError):
        TangencyBlendingSpec(
            base_region=spec.base_region, cap_base=spec.cap_base,
            cap_radius=0.71, ell=1, base_linear=spec.base_linear,
            site_center=spec.site_center, rotations=spec.rotations,
            base_translates=spec.base_translates, direction="cs", cone=spec.cone)


def test_find_transition_examples():
    trans = AffineMap.translation([1.0, 1.0])
    to_region = Region.ball([2.0, 2.0], 0.25)
    word = find_transition([trans], (np.array([1.0, 1.0]), E1),
                           to_region, (E1, 0.4), 5)
    assert word == [1]

    # rotation by pi/2 swaps the expanding axis onto the contracting one
    R90 = AffineMap(np.array([[0.0, -1.0], [1.0, 0.0]]))
    word = find_transition([R90], (np.zeros(2), E1),
                           Region.ball([0.0, 0.0], 1.0), (E2, 0.3), 3)
    assert word == [1]

    assert find_transition([], (np.zeros(2), E1),
                           to_region, (E1, 0.4), 3) is None


def test_tangency_codimension_examples():
    rep = tangency_codimension(1, 1, 1, 2)
    assert rep.c_T == 1 and rep.admissible
    rep = tangency_codimension(2, 2, 2, 4)
    assert rep.c_T == 2 and rep.admissible
    admissible = [l for l in range(1, 5) if tangency_codimension(2, 2, l, 4).admissible]
    assert admissible == [1, 2]
    with pytest.raises(ParamError):
        tangency_codimension(0, 1, 1, 2)


def test_tangency_codimension_roundtrip_identity():
    for c in range(2, 7):
        for cu1 in range(1, c):
            for cs2 in range(1, c):
                for ell in range(1, c + 1):
                    rep = tangency_codimension(cu1, cs2, ell, c)
                    assert ell == cu1 + cs2 - c + rep.c_T


def test_graph_plane_chart():
    base = PlaneFrame(np.eye(4)[:, :2])
    L = np.array([[0.1, 0.0], [0.0, -0.2]])
    E = plane_from_graph(base, L)
    # the graph chart inverts: recovered graph norm matches
    from blenderlab.grassmann import graph_norm
    assert graph_norm(E, base) == pytest.approx(0.2, abs=1e-12)
