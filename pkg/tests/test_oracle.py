import numpy as np
import pytest
from hypothesis import given, strategies as st

from neuralsdf.implicit_geom import Sphere
from neuralsdf.oracle import SdfOracle, brute_force_distance
from neuralsdf.shapes import bumpy_sphere
from neuralsdf.discrete_geom import vertex_normals


@pytest.fixture(scope="module")
def sphere_cloud():
    geo = Sphere(0.6).sample(4000, np.random.default_rng(3))
    return geo, SdfOracle(geo.points, geo.normals)


def spacing(points):
    d, _ = SdfOracle(points, np.zeros_like(points)).tree.query(points, k=2)
    return float(np.mean(d[:, 1]))


def test_kdtree_equals_linear_scan(sphere_cloud, rng):
    geo, oracle = sphere_cloud
    q = rng.uniform(-1, 1, (1000, 3))
    assert np.array_equal(oracle.unsigned_distance(q), brute_force_distance(geo.points, q))


@given(seed=st.integers(0, 10_000))
def test_kdtree_equals_linear_scan_small(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(rng.integers(1, 60), 3))
    q = rng.normal(size=(20, 3))
    assert np.array_equal(SdfOracle(pts, pts).unsigned_distance(q), brute_force_distance(pts, q))


def test_sign_accuracy(sphere_cloud, rng):
    geo, oracle = sphere_cloud
    h = spacing(geo.points)
    s = Sphere(0.6)
    q = rng.uniform(-1, 1, (20000, 3))
    q = q[np.abs(s.sdf(q)) > 2 * h]
    acc = np.mean(oracle.sign_estimate(q) == np.sign(s.sdf(q)))
    assert acc >= 0.99


def test_distance_close_to_exact(sphere_cloud, rng):
    geo, oracle = sphere_cloud
    q = rng.uniform(-1, 1, (2000, 3))
    # a sample cloud overestimates distance by at most about the spacing
    gap = oracle.unsigned_distance(q) - np.abs(Sphere(0.6).sdf(q))
    assert gap.min() >= -1e-12 and gap.max() < 2 * spacing(geo.points)


def test_mesh_cloud_sign():
    m = bumpy_sphere(3)
    oracle = SdfOracle(m.vertices, vertex_normals(m))
    assert oracle.signed_distance(np.zeros(3)) < 0
    assert oracle.signed_distance(np.array([3.0, 0, 0])) > 0


def test_single_point_and_ties():
    o = SdfOracle([[0.0, 0, 0]], [[0.0, 0, 1]], k_sign=8)
    assert o.k_sign == 1
    assert o.signed_distance(np.array([[0, 0, -2.0]]))[0] == -2.0
    # on the tangent plane the vote ties and counts as outside
    assert o.signed_distance(np.array([[1.0, 0, 0]]))[0] == 1.0


def test_bad_inputs():
    with pytest.raises(ValueError):
        SdfOracle(np.zeros((0, 3)), np.zeros((0, 3)))
    with pytest.raises(ValueError):
        SdfOracle(np.zeros((3, 3)), np.zeros((2, 3)))
