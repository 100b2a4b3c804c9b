import numpy as np
import pytest

from contentlab import zoo
from contentlab.content import mapping_content_upper
from contentlab.metric import GridMap, SupCloud, TreeSpace, lipschitz_check
from contentlab.trees import (LipschitzViolation, MetricTree, TreeFactorization, compose_factorization,
                              factor_check, validate_tree)


def test_segment_passes():
    assert validate_tree(MetricTree.path([0, 0.3, 1.0])).passed


def test_tripod_passes():
    t = MetricTree.star([[1.0], [2.0], [0.5]])
    rep = validate_tree(t)
    assert rep.passed and rep.exhaustive


def test_four_cycle_fails_with_witness():
    t = MetricTree(4, [(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 0, 1)])
    rep = validate_tree(t)
    assert not rep.passed
    assert not rep.acyclic
    assert not rep.four_point
    assert sorted(rep.witness) == [0, 1, 2, 3]
    assert rep.gap == pytest.approx(2.0)


def test_disconnected_fails():
    rep = validate_tree(MetricTree(3, [(0, 1, 1.0)]))
    assert not rep.connected and not rep.passed


def test_non_positive_edges_rejected():
    with pytest.raises(ValueError):
        MetricTree(2, [(0, 1, 0.0)])


def test_large_tree_is_sampled():
    t = MetricTree.path(np.arange(60, dtype=float))
    rep = validate_tree(t, samples=2000)
    assert rep.passed and not rep.exhaustive


def test_star_distances():
    t = MetricTree.star([[0.25, 0.5], [0.5]])
    D = t.distances
    assert t.labels[0] == ("centre", 0.0)
    assert D[2, 3] == pytest.approx(1.0)
    assert D[1, 2] == pytest.approx(0.25)


def _segment_factorization(K=3):
    pos = np.arange(2 ** K + 1) / 2 ** K
    tree = MetricTree.path(pos)
    x = GridMap(1, 1, K, SupCloud([[0.0]]), np.zeros((2 ** K + 1) ** 2)).coords()
    g = GridMap(1, 1, K, TreeSpace(tree), np.rint(x[:, 0] * 2 ** K).astype(int))
    return TreeFactorization(g, SupCloud(pos[:, None]))


def test_segment_factorization_composes_to_projection():
    tf = _segment_factorization()
    f = compose_factorization(tf)
    proj, _ = zoo("projection", 1, 1, 3)
    assert np.array_equal(f.image_coords(), proj.image_coords())


def test_root_factorization_is_constant():
    tf = _segment_factorization()
    g = tf.g.with_values(tf.g.target, np.zeros(tf.g.npoints, dtype=int))
    f = compose_factorization(TreeFactorization(g, SupCloud(np.random.default_rng(0).uniform(0, 0.1, (9, 2)))))
    assert lipschitz_check(f).constant == 0


def test_bad_leg_is_reported():
    tf = _segment_factorization()
    h = SupCloud(3 * tf.h.points)
    with pytest.raises(LipschitzViolation) as exc:
        compose_factorization(TreeFactorization(tf.g, h))
    assert exc.value.leg == "h"


def test_factor_check_exact_and_perturbed():
    f, tf = zoo("distance_to_point", 2, 0, 3)
    assert factor_check(f, tf, tol=0.0).passed
    for amp, expect in ((0.1, False), (0.01, True)):
        pts = f.target.points.copy()
        pts[:, 0] += amp
        moved = f.with_values(SupCloud(pts), f.values)
        rep = factor_check(moved, tf, tol=0.05)
        assert rep.passed is expect
        assert rep.sup_distance == pytest.approx(amp)


@pytest.mark.parametrize("name,params", [("distance_to_point", {}), ("segment_tree", {}),
                                         ("star_tree", {"legs": 4}), ("star_tree", {"legs": 3})])
def test_shipped_factorizations(name, params):
    f, tf = zoo(name, 2, 0, 3, **params)
    assert validate_tree(tf.tree).passed
    assert factor_check(f, tf, tol=0.0).passed
    assert lipschitz_check(compose_factorization(tf)).constant <= 1 + 1e-12


def test_star_tree_content_decays():
    values = []
    for K in range(1, 6):
        f, tf = zoo("star_tree", 2, 0, K, legs=4)
        values.append(mapping_content_upper(f, K).value)
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))
    assert values[-1] <= 8 * 2 ** -5 * (tf.tree.total_length + 1)
