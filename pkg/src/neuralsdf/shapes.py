"""Procedural test meshes with outward, counter-clockwise faces."""

from __future__ import annotations

import numpy as np

from .discrete_geom import TriMesh


def icosphere(subdivisions: int = 3, radius: float = 1.0) -> TriMesh:
    t = (1.0 + 5**0.5) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    v = [np.asarray(p, dtype=np.float64) / np.linalg.norm(p) for p in verts]
    for _ in range(subdivisions):
        cache: dict = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = v[a] + v[b]
                v.append(m / np.linalg.norm(m))
                cache[key] = len(v) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return TriMesh(radius * np.asarray(v), np.asarray(faces), name="icosphere")


def grid(n: int = 10, size: float = 1.0, z: float = 0.0) -> TriMesh:
    """Flat ``n x n`` vertex grid in the plane ``z``, normal +z."""
    s = np.linspace(-size / 2, size / 2, n)
    x, y = np.meshgrid(s, s, indexing="xy")
    verts = np.stack([x.ravel(), y.ravel(), np.full(n * n, z)], axis=1)
    faces = []
    for r in range(n - 1):
        for c in range(n - 1):
            a = r * n + c
            faces += [(a, a + 1, a + n + 1), (a, a + n + 1, a + n)]
    return TriMesh(verts, np.asarray(faces), name="grid")


def cylinder(radius: float = 1.0, height: float = 2.0, n_around: int = 64,
             n_along: int = 32) -> TriMesh:
    """Open tube around the z axis (boundary rings at both ends)."""
    ang = np.linspace(0, 2 * np.pi, n_around, endpoint=False)
    zs = np.linspace(-height / 2, height / 2, n_along)
    verts = np.array([(radius * np.cos(a), radius * np.sin(a), z) for z in zs for a in ang])
    faces = []
    for r in range(n_along - 1):
        for c in range(n_around):
            a = r * n_around + c
            b = r * n_around + (c + 1) % n_around
            faces += [(a, b, b + n_around), (a, b + n_around, a + n_around)]
    return TriMesh(verts, np.asarray(faces), name="cylinder")


def torus(major: float = 2.0, minor: float = 0.5, n_ring: int = 64, n_tube: int = 32) -> TriMesh:
    phi = np.linspace(0, 2 * np.pi, n_ring, endpoint=False)
    theta = np.linspace(0, 2 * np.pi, n_tube, endpoint=False)
    verts = []
    for p in phi:
        for t in theta:
            w = major + minor * np.cos(t)
            verts.append((w * np.cos(p), w * np.sin(p), minor * np.sin(t)))
    faces = []
    for i in range(n_ring):
        for j in range(n_tube):
            a = i * n_tube + j
            b = ((i + 1) % n_ring) * n_tube + j
            c = ((i + 1) % n_ring) * n_tube + (j + 1) % n_tube
            d = i * n_tube + (j + 1) % n_tube
            faces += [(a, b, c), (a, c, d)]
    return TriMesh(np.asarray(verts), np.asarray(faces), name="torus")


def bumpy_sphere(subdivisions: int = 4, radius: float = 1.0, amplitude: float = 0.12,
                 frequency: float = 4.0) -> TriMesh:
    """Icosphere with a smooth radial displacement; curvature varies strongly."""
    base = icosphere(subdivisions)
    u = base.vertices
    bump = np.sin(frequency * u[:, 0]) * np.sin(frequency * u[:, 1]) * np.sin(frequency * u[:, 2])
    verts = radius * (1.0 + amplitude * bump)[:, None] * u
    return TriMesh(verts, base.faces, name="bumpy_sphere")
