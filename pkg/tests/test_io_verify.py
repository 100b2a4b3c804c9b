import copy
import json

import numpy as np
import pytest

from contentlab import io, zoo
from contentlab.content import faces_lower_bound, mapping_content_upper
from contentlab.metric import GridMap, SupCloud
from contentlab.seminorm import good_cube_search, positive_content_certificate
from contentlab.verify import verify


@pytest.mark.parametrize("name", ["projection", "random", "star_tree", "segment_tree"])
def test_gridmap_round_trip_is_exact(name, tmp_path):
    f, tf = zoo(name, 1, 1, 3)
    path = tmp_path / "map.json"
    io.save_gridmap(f, str(path))
    g = io.load_gridmap(str(path))
    assert g.content_hash() == f.content_hash()
    assert np.array_equal(g.target.full_matrix(), f.target.full_matrix())
    if tf is not None:
        back = io.factorization_from_dict(json.loads(json.dumps(io.factorization_to_dict(tf))))
        assert np.array_equal(back.h.points, tf.h.points)


def test_reals_keep_every_bit():
    x = np.array([0.1, 1 / 3, np.nextafter(1.0, 2.0), 5e-324])
    assert np.array_equal(io.parse_reals(io.reals(x)), x)


def test_hash_changes_with_values():
    f, _ = zoo("projection", 1, 1, 2)
    pts = f.target.points.copy()
    pts[0, 0] += 1e-15
    g = f.with_values(SupCloud(pts), f.values)
    assert f.content_hash() != g.content_hash()


def test_dump_json_is_stable(tmp_path):
    obj = {"b": 1, "a": [io.real(0.1)]}
    assert io.dump_json(obj) == io.dump_json(json.loads(io.dump_json(obj)))
    io.dump_json(obj, str(tmp_path / "x" / "o.json"))
    assert io.load_json(str(tmp_path / "x" / "o.json")) == obj
    assert not [p for p in (tmp_path / "x").iterdir() if p.name.startswith(".tmp")]


def _cycle(cert):
    return json.loads(json.dumps(cert))


def test_faces_certificate_verifies_and_catches_tampering():
    f, _ = zoo("random", 2, 0, 3, seed=1)
    cert = _cycle(io.face_certificate_to_dict(faces_lower_bound(f), f))
    assert verify(cert, f).passed
    bad = copy.deepcopy(cert)
    bad["axis_distances"][1] = io.real(float(bad["axis_distances"][1]) + 1e-3)
    rep = verify(bad, f)
    assert not rep.passed and any("axis 1" in e for e in rep.failures)


def test_perturbed_map_fails_with_axis_named():
    f, _ = zoo("projection", 1, 1, 3)
    cert = _cycle(io.face_certificate_to_dict(faces_lower_bound(f), f))
    pts = f.target.points.copy()
    pts[-1] += 0.01
    g = f.with_values(SupCloud(pts), f.values)
    cert["map_hash"] = g.content_hash()
    rep = verify(cert, g)
    assert not rep.passed and any(e.startswith("axis 0") for e in rep.failures)


def test_hash_mismatch_fails_first():
    f, _ = zoo("projection", 1, 1, 3)
    g, _ = zoo("fold", 1, 1, 3)
    cert = _cycle(io.face_certificate_to_dict(faces_lower_bound(f), f))
    rep = verify(cert, g)
    assert not rep.passed and "hash" in rep.failures[0]


def test_dp_certificate_round_trip():
    f, _ = zoo("random", 1, 1, 3, seed=3)
    cert = _cycle(io.dp_certificate_to_dict(mapping_content_upper(f, 3), f))
    assert verify(cert, f).passed
    bad = copy.deepcopy(cert)
    bad["cover"] = bad["cover"][1:]
    assert "cover misses part of Q_0" in verify(bad, f).failures
    bad = copy.deepcopy(cert)
    bad["value"] = io.real(float(bad["value"]) * 0.9)
    assert not verify(bad, f).passed


def test_witness_and_positive_certificates_verify():
    f, _ = zoo("projection", 1, 1, 3)
    w = good_cube_search(f, 0.1, 0.5, 0.25)
    assert verify(_cycle(io.witness_to_dict(w)), f).passed
    cert = _cycle(io.positive_certificate_to_dict(positive_content_certificate(f, w)))
    assert verify(cert, f).passed
    bad = copy.deepcopy(cert)
    bad["certified"] = io.real(float(bad["certified"]) + 0.01)
    assert any(e.startswith("certified") for e in verify(bad, f).failures)


def test_unknown_certificate_type():
    f, _ = zoo("projection", 1, 1, 2)
    assert not verify({"type": "mystery"}, f).passed


def test_finite_and_tree_targets_round_trip():
    from contentlab.metric import FiniteMetric
    D = np.array([[0, 1, 2], [1, 0, 1], [2, 1, 0]], dtype=float)
    f = GridMap(1, 0, 1, FiniteMetric(D), np.array([0, 1, 2]), 2.0)
    g = io.gridmap_from_dict(_cycle(io.gridmap_to_dict(f)))
    assert g.content_hash() == f.content_hash()
    t, _ = zoo("star_tree", 1, 1, 2)
    assert io.gridmap_from_dict(_cycle(io.gridmap_to_dict(t))).content_hash() == t.content_hash()
