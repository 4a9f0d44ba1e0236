import numpy as np
import pytest

from blenderlab.errors import BudgetError, ParamError
from blenderlab.fibermaps import AffineMap
from blenderlab.globalization import (chart_family_globalization,
                                      check_RT_condition,
                                      local_translation_family, replay_word,
                                      semigroup_coverage)
from blenderlab.regions import Region
from blenderlab.skewproduct import OneStepSystem


def test_local_family_interval_example():
    U0 = Region.box([0.5], [0.5])  # the interval (0, 1)
    fam = local_translation_family(U0, 0.1)
    assert len(fam) == 2
    deltas = sorted(float(f.vector[0]) for f in fam)
    assert deltas == pytest.approx([-0.09, 0.09])
    # pure translation on B_eps(U0) = (-0.1, 1.1)
    pts = np.array([[-0.09], [0.5], [1.09]])
    for f in fam:
        assert np.allclose(f.apply(pts), pts + f.vector, atol=1e-12)
    # identity outside B_2eps(U0) = (-0.2, 1.2)
    far = np.array([[-0.25], [1.21], [2.0]])
    for f in fam:
        assert np.array_equal(f.apply(far), far)


def test_local_family_counts_and_decay():
    # over a fixed region, the plain flow family tends to the identity with
    # eps (a symplectic one cannot: the shell return flow scales with the
    # plateau size, not with eps)
    U0 = Region.ball([0.0, 0.0], 0.2)
    sup_prev = np.inf
    rng = np.random.default_rng(0)
    pts = rng.uniform(-0.8, 0.8, size=(300, 2))
    for eps in (0.2, 0.1, 0.05):
        fam = local_translation_family(U0, eps, symplectic=False)
        assert len(fam) == 3  # c + 1
        sup = max(f.displacement_on(pts) for f in fam)
        assert sup < sup_prev
        sup_prev = sup
    assert sup_prev < 0.03

    # symplectic families over eps-scale charts also vanish with eps
    sup_prev = np.inf
    for eps in (0.2, 0.1, 0.05):
        fam = local_translation_family(Region.ball([0.0, 0.0], 0.6 * eps), eps)
        sup = max(f.displacement_on(pts) for f in fam)
        assert sup < sup_prev
        sup_prev = sup
    assert sup_prev < 0.15


def translation_generators():
    return [AffineMap.translation(v)
            for v in ([0.3, 0.0], [-0.3, 0.0], [0.0, 0.3], [0.0, -0.3])]


def grid_net(lo, hi, n):
    xs = np.linspace(lo, hi, n)
    return np.array([[x, y] for x in xs for y in xs])


def test_semigroup_coverage_translations():
    gens = translation_generators()
    seed = Region.ball([0.5, 0.5], 0.2)
    net = grid_net(0.4, 2.6, 12)
    run = semigroup_coverage(gens, seed, net, 20)
    assert run.covered
    assert max(len(w) for w in run.witness_words) <= 20
    # witness replay: the transported center covers its target
    rng = np.random.default_rng(1)
    for idx in rng.choice(len(net), size=100, replace=True):
        word = run.witness_words[idx]
        end = replay_word(gens, word, seed.center)
        assert np.linalg.norm(end - net[idx]) < seed.radius


def test_semigroup_backward_duality():
    gens = translation_generators()
    seed = Region.ball([0.5, 0.5], 0.2)
    net = grid_net(0.4, 2.6, 8)
    fwd = semigroup_coverage(gens, seed, net, 20)
    bwd = semigroup_coverage(gens, seed, net, 20, direction="backward")
    assert fwd.covered == bwd.covered


def test_semigroup_empty_generators():
    seed = Region.ball([0.5, 0.5], 0.2)
    inside = np.array([[0.45, 0.55], [0.5, 0.5]])
    run = semigroup_coverage([], seed, inside, 3)
    assert run.covered
    outside = np.array([[1.5, 1.5]])
    run = semigroup_coverage([], seed, outside, 3)
    assert not run.covered and len(run.uncovered) == 1


def test_semigroup_growing_reach():
    gens = translation_generators()
    seed = Region.ball([1.5, 1.5], 0.2)
    net = grid_net(0.4, 2.6, 6)
    run = semigroup_coverage(gens, seed, net, 12)
    reach = run.layer_reach
    # strictly increasing until the interest box saturates
    growing = [reach[i + 1] - reach[i] for i in range(min(4, len(reach) - 1))]
    assert all(g > 0.0 for g in growing)


def test_semigroup_budget_error_carries_partial():
    gens = translation_generators()
    seed = Region.ball([0.5, 0.5], 0.2)
    net = grid_net(0.4, 2.6, 12)
    with pytest.raises(BudgetError) as exc_info:
        semigroup_coverage(gens, seed, net, 40, node_budget=25)
    partial = exc_info.value.partial
    assert partial is not None and partial.n_states >= 25


def test_chart_family_relation_counts():
    # s = (dim + 1) * m with m = c + 1 simplex directions
    atlas1 = chart_family_globalization(Region.box([1.5], [1.5]), 0.1)
    assert atlas1.n_classes == 2
    assert atlas1.s == (1 + 1) * 2 == 4
    atlas2 = chart_family_globalization(Region.box([1.5, 1.5], [1.5, 1.5]), 0.3,
                                        scale=0.2)
    assert atlas2.n_classes == 3
    assert atlas2.s == (2 + 1) * 3 == 9


def test_chart_family_identity_limit():
    dom = Region.box([1.5, 1.5], [1.5, 1.5])
    rng = np.random.default_rng(2)
    pts = rng.uniform(0.0, 3.0, size=(200, 2))
    sups = []
    for scale in (0.2, 0.1, 0.05):
        atlas = chart_family_globalization(dom, 0.3, scale=scale)
        sups.append(max(g.displacement_on(pts) for g in atlas.generators))
    assert sups[0] > sups[1] > sups[2]
    assert sups[2] < 0.05


def test_chart_family_globalizes_seed_ball():
    dom = Region.box([1.5, 1.5], [1.5, 1.5])
    atlas = chart_family_globalization(dom, 0.3, scale=0.2)
    seed = Region.ball([1.0, 1.0], 0.08)
    net = grid_net(0.0, 3.0, 7)
    run = semigroup_coverage(atlas.generators, seed, net, 400)
    assert run.covered
    runb = semigroup_coverage(atlas.generators, seed, net, 400, direction="backward")
    assert runb.covered
    # replay the longest witness through the true flows
    lens = [len(w) for w in run.witness_words]
    k = int(np.argmax(lens))
    end = replay_word(atlas.generators, run.witness_words[k], seed.center)
    assert np.linalg.norm(end - net[k]) < seed.radius


def test_check_rt_condition_cases():
    # all maps contract to one fixed point: a far compact stays uncovered
    contracting = OneStepSystem(
        [AffineMap(np.diag([0.5, 0.5])), AffineMap(np.diag([0.4, 0.4]), [0.1, 0.0])],
        nu=0.2)
    far = np.array([[2.5, 2.5]])
    ok, _ = check_RT_condition(contracting, Region.ball([0.0, 0.0], 0.3), far, 12)
    assert not ok
    # a target inside the seed ball is covered immediately
    ok, run = check_RT_condition(contracting, Region.ball([0.0, 0.0], 0.3),
                                 np.array([[0.05, 0.0]]), 1)
    assert ok and run.witness_words[0] == []


def test_semigroup_rejects_bad_args():
    with pytest.raises(ParamError):
        semigroup_coverage([], Region.box([0.0], [1.0]), np.array([[0.0]]), 3)
    with pytest.raises(ParamError):
        semigroup_coverage([], Region.ball([0.0], 1.0), np.array([[0.0]]), 0)
