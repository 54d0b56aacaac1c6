import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial.transform import Rotation

from neuralsdf import discrete_geom as D
from neuralsdf.shapes import bumpy_sphere, grid, icosphere, torus


def curvature_error(subdiv, r=1.0):
    g = D.vertex_geometry(icosphere(subdiv, r))
    return float(np.median(np.abs(np.r_[g.kappa1, g.kappa2] - 1 / r) * r))


def test_icosphere_convergence():
    errs = [curvature_error(s) for s in (2, 3, 4)]
    assert errs[0] >= errs[1] >= errs[2]
    assert errs[2] < 0.05


def test_icosphere_normals_point_out():
    m = icosphere(3, 2.0)
    g = D.vertex_geometry(m)
    assert np.allclose(g.normals, m.vertices / 2.0, atol=2e-2)
    assert np.allclose(D.vertex_normals(m), m.vertices / 2.0, atol=2e-2)


def test_reversed_orientation_flips_signs():
    m = icosphere(2)
    a, b = D.vertex_geometry(m), D.vertex_geometry(m.reversed())
    assert np.allclose(b.normals, -a.normals, atol=1e-12)
    assert np.allclose(b.kappa1, -a.kappa2, atol=1e-12)
    assert np.allclose(D.meyer_mean_curvature(m.reversed()), -D.meyer_mean_curvature(m))


@given(s=st.floats(0.05, 20.0))
def test_scale_covariance(s):
    m = bumpy_sphere(2)
    a = D.vertex_geometry(m)
    b = D.vertex_geometry(m.transformed(scale=s))
    assert np.allclose(b.kappa1 * s, a.kappa1, rtol=1e-9, atol=1e-9)
    assert np.allclose(b.kappa2 * s, a.kappa2, rtol=1e-9, atol=1e-9)
    assert np.allclose(b.dual_area, a.dual_area * s * s, rtol=1e-9)


@given(seed=st.integers(0, 2**31), offset=st.tuples(*[st.floats(-5, 5)] * 3))
def test_rigid_invariance(seed, offset):
    rot = Rotation.random(random_state=seed).as_matrix()
    m = bumpy_sphere(2)
    a = D.vertex_geometry(m)
    b = D.vertex_geometry(m.transformed(rot, offset=offset))
    assert np.allclose(b.kappa1, a.kappa1, atol=1e-9)
    assert np.allclose(b.kappa2, a.kappa2, atol=1e-9)
    ok = ~a.flagged
    assert np.allclose(b.normals[ok], a.normals[ok] @ rot.T, atol=1e-9)
    # principal directions are defined up to sign
    dots = np.abs(np.sum(b.e1[ok] * (a.e1[ok] @ rot.T), axis=1))
    assert np.allclose(dots, 1.0, atol=1e-6)


def test_torus_signs():
    g = D.vertex_geometry(torus(2.0, 0.5, 96, 48))
    assert np.allclose(g.kappa1, 2.0, atol=0.02)
    outer = np.hypot(g.points[:, 0], g.points[:, 1]) > 2.4
    inner = np.hypot(g.points[:, 0], g.points[:, 1]) < 1.6
    assert np.all(g.kappa2[outer] > 0.3) and np.all(g.kappa2[inner] < -0.5)


def test_flat_grid():
    g = D.vertex_geometry(grid(8))
    interior = ~D.TriMesh(grid(8).vertices, grid(8).faces).boundary_vertices()
    assert np.allclose(g.kappa1[interior], 0) and np.allclose(g.kappa2[interior], 0)
    assert g.flagged.all()      # flat vertices and boundary vertices


def test_hand_dihedral():
    # two faces folded 90 degrees along the x axis
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, -1.0]])
    m = D.TriMesh(v, [[0, 1, 2], [1, 0, 3]])
    pairs, beta = D.edge_dihedrals(m)
    assert pairs.tolist() == [[0, 1]] and beta[0] == pytest.approx(np.pi / 2)
    flat = D.TriMesh(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, -1, 0.0]]),
                     [[0, 1, 2], [1, 0, 3]])
    assert D.edge_dihedrals(flat)[1][0] == pytest.approx(0.0, abs=1e-15)


def test_meyer_sphere():
    for s in (2, 3, 4):
        assert np.median(np.abs(D.meyer_mean_curvature(icosphere(s, 0.5)) - 2.0)) < 0.02


def test_obj_roundtrip(tmp_path):
    m = bumpy_sphere(2)
    D.save_obj(m, tmp_path / "b.obj")
    back = D.load_obj(tmp_path / "b.obj")
    assert np.array_equal(back.vertices, m.vertices) and np.array_equal(back.faces, m.faces)
    assert back.name == "b"


def test_obj_features(tmp_path):
    path = tmp_path / "q.obj"
    path.write_text("# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n"
                    "vn 0 0 1\nf 1//1 2//1 3//1 4//1\nf -4 -2 -1  # negative indices\n")
    m = D.load_obj(path)
    assert m.faces.tolist() == [[0, 1, 2], [0, 2, 3], [0, 2, 3]]
    assert np.allclose(m.normals, [[0, 0, 1]] * 4)


@pytest.mark.parametrize("text, line", [
    ("v 0 0\n", 1),
    ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n", 4),
    ("v 0 0 0\nf 0 1 1\n", 2),
    ("v 0 0 x\n", 1),
    ("v 0 0 0\nf 1 1\n", 2),
])
def test_obj_errors(tmp_path, text, line):
    path = tmp_path / "bad.obj"
    path.write_text(text)
    with pytest.raises(D.ObjParseError) as err:
        D.load_obj(path)
    assert err.value.lineno == line


def test_degenerate_faces_dropped():
    v = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0.0]])
    with pytest.warns(D.MeshWarning):
        m = D.TriMesh(v, [[0, 1, 2], [0, 1, 3]])
    assert len(m.faces) == 1


def test_isolated_vertex_is_flagged():
    v = np.vstack([icosphere(1).vertices, [[5.0, 5, 5]]])
    g = D.vertex_geometry(D.TriMesh(v, icosphere(1).faces))
    assert g.flagged[-1] and np.isnan(g.normals[-1]).all()
