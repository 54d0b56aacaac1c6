"""Triangle meshes and their discrete differential geometry.

Per-vertex shape operators follow the edge-based construction: every
interior edge contributes ``beta(e) |e n B| e e^T`` where ``beta`` is the
signed angle between the normals of its two faces (positive on convex
hinges) and ``B`` is the barycentric dual cell of the vertex, so
``|e n B| = |e| / 2`` for edges incident to the vertex.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import VertexGeometry
from .implicit_geom import tangent_eigen


class ObjParseError(ValueError):
    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.lineno = lineno


class MeshWarning(UserWarning):
    pass


@dataclass
class TriMesh:
    vertices: np.ndarray
    faces: np.ndarray
    normals: np.ndarray | None = None
    name: str = "mesh"
    _edges: dict | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if faces.size and (faces.min() < 0 or faces.max() >= len(self.vertices)):
            raise ValueError("face index out of range")
        area = _face_areas(self.vertices, faces)
        degenerate = ~(area > 0)
        if degenerate.any():
            warnings.warn(f"dropping {int(degenerate.sum())} zero-area faces", MeshWarning)
            faces = faces[~degenerate]
        self.faces = faces
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def face_normals(self) -> np.ndarray:
        """Unit face normals (counter-clockwise orientation)."""
        c = _face_cross(self.vertices, self.faces)
        return c / np.linalg.norm(c, axis=1, keepdims=True)

    def face_areas(self) -> np.ndarray:
        return _face_areas(self.vertices, self.faces)

    def reversed(self) -> "TriMesh":
        return TriMesh(self.vertices.copy(), self.faces[:, ::-1].copy(),
                       None if self.normals is None else -self.normals, self.name)

    def transformed(self, matrix=None, scale: float = 1.0, offset=None) -> "TriMesh":
        v = self.vertices
        if matrix is not None:
            v = v @ np.asarray(matrix).T
        v = scale * v
        if offset is not None:
            v = v + np.asarray(offset)
        normals = None
        if self.normals is not None and matrix is not None:
            normals = self.normals @ np.asarray(matrix).T
        return TriMesh(v, self.faces.copy(), normals, self.name)

    def edges(self) -> dict:
        """Map ``(i, j)`` with ``i < j`` to the list of incident face indices."""
        if self._edges is None:
            edges: dict = {}
            for fi, (a, b, c) in enumerate(self.faces):
                for i, j in ((a, b), (b, c), (c, a)):
                    edges.setdefault((min(i, j), max(i, j)), []).append(fi)
            bad = sum(1 for fs in edges.values() if len(fs) > 2)
            if bad:
                warnings.warn(f"{bad} non-manifold edges excluded from the shape operator",
                              MeshWarning)
            self._edges = edges
        return self._edges

    def boundary_vertices(self) -> np.ndarray:
        flag = np.zeros(self.n_vertices, dtype=bool)
        for (i, j), fs in self.edges().items():
            if len(fs) != 2:
                flag[[i, j]] = True
        return flag


def _face_cross(v, f):
    return np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])


def _face_areas(v, f):
    if len(f) == 0:
        return np.zeros(0)
    return 0.5 * np.linalg.norm(_face_cross(v, f), axis=1)


# ---------------------------------------------------------------------------
# Wavefront OBJ
# ---------------------------------------------------------------------------

def _obj_index(token, count, path, lineno):
    try:
        k = int(token)
    except ValueError:
        raise ObjParseError(path, lineno, f"bad index {token!r}") from None
    if k == 0:
        raise ObjParseError(path, lineno, "OBJ indices are 1-based")
    k = k - 1 if k > 0 else count + k
    if not 0 <= k < count:
        raise ObjParseError(path, lineno, f"index {token} out of range")
    return k


def load_obj(path) -> TriMesh:
    """Read ``v``/``vn``/``f`` records; polygons are fan-triangulated."""
    verts, vnormals, faces, corner_normals = [], [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split("#", 1)[0].split()
            if not parts:
                continue
            tag, args = parts[0], parts[1:]
            if tag in ("v", "vn"):
                if len(args) < 3:
                    raise ObjParseError(path, lineno, f"'{tag}' needs 3 coordinates")
                try:
                    xyz = [float(a) for a in args[:3]]
                except ValueError:
                    raise ObjParseError(path, lineno, f"bad number in {line.strip()!r}") from None
                (verts if tag == "v" else vnormals).append(xyz)
            elif tag == "f":
                if len(args) < 3:
                    raise ObjParseError(path, lineno, "face needs at least 3 vertices")
                idx, nidx = [], []
                for token in args:
                    fields = token.split("/")
                    idx.append(_obj_index(fields[0], len(verts), path, lineno))
                    if len(fields) == 3 and fields[2]:
                        nidx.append(_obj_index(fields[2], len(vnormals), path, lineno))
                for k in range(1, len(idx) - 1):
                    faces.append((idx[0], idx[k], idx[k + 1]))
                if len(nidx) == len(idx):
                    corner_normals.extend(zip(idx, nidx))
    normals = None
    if corner_normals:
        normals = np.full((len(verts), 3), np.nan)
        vn = np.asarray(vnormals, dtype=np.float64)
        for vi, ni in corner_normals:
            normals[vi] = vn[ni]
    name = str(path).rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return TriMesh(np.asarray(verts, dtype=np.float64).reshape(-1, 3),
                   np.asarray(faces, dtype=np.int64).reshape(-1, 3), normals, name)


def save_obj(mesh: TriMesh, path) -> None:
    with open(path, "w") as fh:
        for v in mesh.vertices.tolist():
            fh.write(f"v {v[0]!r} {v[1]!r} {v[2]!r}\n")
        for f in mesh.faces + 1:
            fh.write(f"f {f[0]} {f[1]} {f[2]}\n")


# ---------------------------------------------------------------------------
# normals, shape operators, curvatures
# ---------------------------------------------------------------------------

def vertex_normals(mesh: TriMesh, return_flags: bool = False):
    """Area-weighted average of incident face normals.

    Isolated vertices get NaN normals (flagged when ``return_flags``).
    """
    acc = np.zeros_like(mesh.vertices)
    cross = _face_cross(mesh.vertices, mesh.faces)   # 2 * area * unit normal
    for k in range(3):
        np.add.at(acc, mesh.faces[:, k], cross)
    norm = np.linalg.norm(acc, axis=1)
    isolated = ~(norm > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        normals = acc / norm[:, None]
    normals[isolated] = np.nan
    return (normals, isolated) if return_flags else normals


def dual_areas(mesh: TriMesh) -> np.ndarray:
    """Barycentric dual cell areas (a third of every incident face)."""
    area = np.zeros(mesh.n_vertices)
    fa = mesh.face_areas() / 3.0
    for k in range(3):
        np.add.at(area, mesh.faces[:, k], fa)
    return area


def edge_dihedrals(mesh: TriMesh):
    """Interior manifold edges ``(E, 2)`` and their signed dihedral angles."""
    fn = mesh.face_normals()
    pairs, f1, f2 = [], [], []
    for edge, fs in mesh.edges().items():
        if len(fs) == 2:
            pairs.append(edge)
            f1.append(fs[0])
            f2.append(fs[1])
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if not len(pairs):
        return pairs, np.zeros(0)
    f1, f2 = np.asarray(f1), np.asarray(f2)
    n1, n2 = fn[f1], fn[f2]
    angle = np.arctan2(np.linalg.norm(np.cross(n1, n2), axis=1), np.sum(n1 * n2, axis=1))
    # convex hinge: the far vertex of the second face sits below the first face
    v = mesh.vertices
    far = mesh.faces[f2].sum(axis=1) - pairs.sum(axis=1)
    side = np.sum((v[far] - v[pairs[:, 0]]) * n1, axis=1)
    beta = np.where(side > 0, -angle, angle)
    return pairs, beta


def shape_operators(mesh: TriMesh) -> np.ndarray:
    """Discrete shape operator at every vertex, ``(n, 3, 3)``."""
    pairs, beta = edge_dihedrals(mesh)
    acc = np.zeros((mesh.n_vertices, 3, 3))
    if len(pairs):
        vec = mesh.vertices[pairs[:, 1]] - mesh.vertices[pairs[:, 0]]
        length = np.linalg.norm(vec, axis=1)
        unit = vec / length[:, None]
        contrib = (beta * length / 2.0)[:, None, None] * unit[:, :, None] * unit[:, None, :]
        np.add.at(acc, pairs[:, 0], contrib)
        np.add.at(acc, pairs[:, 1], contrib)
    area = dual_areas(mesh)
    with np.errstate(invalid="ignore", divide="ignore"):
        ops = acc / area[:, None, None]
    return 0.5 * (ops + ops.transpose(0, 2, 1))


def discrete_shape_operator(mesh: TriMesh, vertex: int) -> np.ndarray:
    return shape_operators(mesh)[vertex]


def vertex_geometry(mesh: TriMesh, operators: np.ndarray | None = None) -> VertexGeometry:
    """Normals, principal curvatures and directions from the discrete operator.

    The normal is the eigenvector with the smallest absolute eigenvalue.  It
    falls back to the area-weighted normal when that eigenvalue is not
    isolated (flat or cylindrical vertices) or the eigenvector strays more
    than 60 degrees from it; such vertices are flagged.  Curvatures and
    directions are permuted: the eigenvector of the larger tangent
    eigenvalue is the direction of the *smaller* curvature.
    """
    ops = shape_operators(mesh) if operators is None else operators
    area_normals, isolated = vertex_normals(mesh, return_flags=True)
    n = mesh.n_vertices
    lam, vec = np.linalg.eigh(np.nan_to_num(ops))
    pick = np.argmin(np.abs(lam), axis=1)
    cand = vec[np.arange(n), :, pick]
    lam_pick = lam[np.arange(n), pick]
    scale = np.max(np.abs(lam), axis=1)
    others = np.abs(lam - lam_pick[:, None])
    others[np.arange(n), pick] = np.inf
    separated = others.min(axis=1) > 1e-6 * scale
    align = np.sum(cand * np.nan_to_num(area_normals), axis=1)
    from_operator = separated & (np.abs(align) >= 0.5) & (scale > 1e-12)
    normals = np.where(from_operator[:, None], cand * np.sign(align)[:, None], area_normals)
    normals[isolated] = np.nan

    ok = ~isolated
    p = np.eye(3) - normals[ok, :, None] * normals[ok, None, :]
    proj = p @ np.nan_to_num(ops[ok]) @ p
    lam_hi, lam_lo, u_hi, u_lo = tangent_eigen(proj, normals[ok])
    k1 = np.full(n, np.nan)
    k2 = np.full(n, np.nan)
    e1 = np.full((n, 3), np.nan)
    k1[ok], k2[ok] = lam_hi, lam_lo
    e1[ok] = u_lo
    e2 = np.cross(normals, e1)
    flat = scale <= 1e-12
    k1[flat & ok] = 0.0
    k2[flat & ok] = 0.0
    umbilic = np.abs(k1 - k2) < 1e-7 * np.maximum(1.0, np.abs(k1) + np.abs(k2))
    flagged = isolated | ~from_operator | umbilic | mesh.boundary_vertices()
    return VertexGeometry(mesh.vertices.copy(), normals, k1, k2, e1, e2,
                          dual_areas(mesh), flagged)


def meyer_mean_curvature(mesh: TriMesh, return_area: bool = False):
    """Mean curvature from the cotangent Laplacian with mixed Voronoi areas.

    ``H = |K| / 2`` where ``K = (1/2A) sum (cot a + cot b)(x_i - x_j)``,
    signed by the alignment of ``K`` with the area-weighted normal.
    """
    v, f = mesh.vertices, mesh.faces
    n = mesh.n_vertices
    lap = np.zeros((n, 3))
    area = np.zeros(n)
    corners = [v[f[:, k]] for k in range(3)]
    cots = []
    for k in range(3):
        a = corners[(k + 1) % 3] - corners[k]
        b = corners[(k + 2) % 3] - corners[k]
        cots.append(np.sum(a * b, axis=1) / np.linalg.norm(np.cross(a, b), axis=1))
    face_area = mesh.face_areas()
    obtuse = [np.sum((corners[(k + 1) % 3] - corners[k]) * (corners[(k + 2) % 3] - corners[k]),
                     axis=1) < 0 for k in range(3)]
    any_obtuse = obtuse[0] | obtuse[1] | obtuse[2]
    for k in range(3):
        i = f[:, k]
        xi, xj, xl = corners[k], corners[(k + 1) % 3], corners[(k + 2) % 3]
        # edge (i, j) is opposite corner l, edge (i, l) opposite corner j
        cot_l, cot_j = cots[(k + 2) % 3], cots[(k + 1) % 3]
        np.add.at(lap, i, cot_l[:, None] * (xi - xj) + cot_j[:, None] * (xi - xl))
        voronoi = (np.sum((xi - xj) ** 2, axis=1) * cot_l
                   + np.sum((xi - xl) ** 2, axis=1) * cot_j) / 8.0
        mixed = np.where(~any_obtuse, voronoi,
                         np.where(obtuse[k], face_area / 2.0, face_area / 4.0))
        np.add.at(area, i, mixed)
    with np.errstate(invalid="ignore", divide="ignore"):
        k_vec = lap / (2.0 * area[:, None])
    normals = vertex_normals(mesh)
    h = 0.5 * np.linalg.norm(k_vec, axis=1) * np.sign(np.sum(k_vec * normals, axis=1))
    return (h, area) if return_area else h
