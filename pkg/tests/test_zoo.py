import numpy as np
import pytest

from contentlab import zoo
from contentlab.content import faces_lower_bound
from contentlab.metric import lipschitz_check
from contentlab.trees import factor_check
from contentlab.zoo import NAMES


def test_projection_lattice_size():
    f, tf = zoo("projection", 1, 1, 3)
    assert f.npoints == 81 and tf is None
    assert np.array_equal(f.image_coords()[:, 0], f.coords()[:, 0])


@pytest.mark.parametrize("name", NAMES)
def test_every_map_is_lipschitz(name):
    f, _ = zoo(name, 1, 1, 3)
    assert not lipschitz_check(f).violation


@pytest.mark.parametrize("name", ["distance_to_point", "segment_tree", "star_tree"])
def test_shipped_factorizations_compose(name):
    f, tf = zoo(name, 1, 1, 3)
    assert tf is not None
    assert factor_check(f, tf, tol=1e-12).passed


def test_fold_faces_touch():
    f, _ = zoo("fold", 1, 1, 3)
    assert faces_lower_bound(f).product == 0


def test_parameters_are_validated():
    with pytest.raises(ValueError, match="unknown zoo map"):
        zoo("spiral")
    with pytest.raises(ValueError):
        zoo("projection", 0, 2, 2)
    with pytest.raises(ValueError):
        zoo("linear_functional", 1, 1, 2, a=[1.0])
    with pytest.raises(ValueError):
        zoo("star_tree", 1, 1, 2, legs=5)


def test_deterministic_by_seed():
    a, _ = zoo("random", 1, 1, 3, seed=4)
    b, _ = zoo("random", 1, 1, 3, seed=4)
    c, _ = zoo("random", 1, 1, 3, seed=5)
    assert a.content_hash() == b.content_hash() != c.content_hash()


def test_perturbed_declares_amplitude():
    f, _ = zoo("perturbed", 1, 1, 3, amplitude=0.1, seed=2)
    assert f.declared_lip == pytest.approx(1.1)
    assert not lipschitz_check(f).violation
