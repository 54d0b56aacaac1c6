"""Differential geometry of level sets from (value, gradient, Hessian) probes.

All functions broadcast over leading batch dimensions: a probe may hold a
single point (``gradient.shape == (3,)``) or a batch (``(B, 3)``).

Sign convention: principal curvatures are eigenvalues of ``+dN`` on the
tangent plane, so a sphere with outward normal has ``k1 = k2 = 1/r`` and
``2H = div(grad f / |grad f|)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import VertexGeometry

EPS_GRAD = 1e-8
UMBILIC_TOL = 1e-7


class SingularGradientError(ValueError):
    """The gradient vanishes where a normal is required."""


class NotTangentError(ValueError):
    pass


@dataclass
class ImplicitProbe:
    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray


@dataclass
class CurvatureReport:
    normal: np.ndarray
    shape_operator: np.ndarray
    kappa1: np.ndarray
    kappa2: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    gaussian: np.ndarray
    mean: np.ndarray
    umbilic: np.ndarray


def _normal(gradient, eps=EPS_GRAD):
    g = np.asarray(gradient, dtype=np.float64)
    r = np.linalg.norm(g, axis=-1)
    if np.any(~(r > eps)):
        raise SingularGradientError(f"gradient norm below {eps}")
    return g / r[..., None], r


def _projector(n):
    return np.eye(3) - n[..., :, None] * n[..., None, :]


def shape_operator(probe: ImplicitProbe, eps: float = EPS_GRAD) -> np.ndarray:
    """``(I - N N^T) Hf / |grad f|``."""
    n, r = _normal(probe.gradient, eps)
    return _projector(n) @ np.asarray(probe.hessian) / r[..., None, None]


def projected_shape_operator(probe: ImplicitProbe, eps: float = EPS_GRAD) -> np.ndarray:
    """Symmetric two-sided form ``P Hf P / |grad f|``.

    Shares its spectrum with :func:`shape_operator` and coincides with it
    whenever ``Hf N = 0`` (exact distance functions).
    """
    n, r = _normal(probe.gradient, eps)
    p = _projector(n)
    h = np.asarray(probe.hessian)
    h = 0.5 * (h + np.swapaxes(h, -1, -2))
    return p @ h @ p / r[..., None, None]


def tangent_eigen(s, n):
    """Tangent eigenpairs of a symmetric operator with ``s n = 0``.

    The normal is pushed to the bottom of the spectrum by subtracting
    ``mu n n^T`` (``mu`` above the spectral radius), which leaves the tangent
    eigenpairs untouched but keeps them separated from the normal one.
    Returns ``(k1, k2, e1, e2)`` with ``k1 >= k2``.
    """
    mu = 1.0 + np.linalg.norm(s, axis=(-2, -1))
    shifted = s - mu[..., None, None] * (n[..., :, None] * n[..., None, :])
    lam, vec = np.linalg.eigh(shifted)
    k2, k1 = lam[..., 1], lam[..., 2]
    e1 = vec[..., :, 2]
    e2 = np.cross(n, e1)
    return k1, k2, e1, e2


def curvatures(probe: ImplicitProbe, eps: float = EPS_GRAD) -> CurvatureReport:
    n, r = _normal(probe.gradient, eps)
    s = projected_shape_operator(probe, eps)
    k1, k2, e1, e2 = tangent_eigen(s, n)
    umbilic = np.abs(k1 - k2) < UMBILIC_TOL * np.maximum(1.0, np.abs(k1) + np.abs(k2))
    return CurvatureReport(n, s, k1, k2, e1, e2, k1 * k2, 0.5 * (k1 + k2), umbilic)


def gaussian_curvature(probe: ImplicitProbe, eps: float = EPS_GRAD) -> np.ndarray:
    """``-det([[Hf, g], [g^T, 0]]) / |g|^4``."""
    g = np.asarray(probe.gradient, dtype=np.float64)
    _, r = _normal(g, eps)
    h = np.asarray(probe.hessian, dtype=np.float64)
    border = np.zeros(g.shape[:-1] + (4, 4))
    border[..., :3, :3] = h
    border[..., :3, 3] = g
    border[..., 3, :3] = g
    return -np.linalg.det(border) / r**4


def mean_curvature(probe: ImplicitProbe, eps: float = EPS_GRAD) -> np.ndarray:
    """``(tr(Hf)|g|^2 - g^T Hf g) / (2|g|^3)``, i.e. half the divergence of the unit normal."""
    g = np.asarray(probe.gradient, dtype=np.float64)
    _, r = _normal(g, eps)
    h = np.asarray(probe.hessian, dtype=np.float64)
    tr = np.trace(h, axis1=-2, axis2=-1)
    ghg = np.einsum("...i,...ij,...j->...", g, h, g)
    return (tr * r**2 - ghg) / (2.0 * r**3)


def normal_curvature(probe: ImplicitProbe, v, eps: float = EPS_GRAD) -> np.ndarray:
    n, _ = _normal(probe.gradient, eps)
    v = np.asarray(v, dtype=np.float64)
    if np.any(np.abs(np.linalg.norm(v, axis=-1) - 1.0) > 1e-6):
        raise NotTangentError("direction must be a unit vector")
    if np.any(np.abs(np.sum(v * n, axis=-1)) >= 1e-6):
        raise NotTangentError("direction is not tangent to the level set")
    s = projected_shape_operator(probe, eps)
    return np.einsum("...i,...ij,...j->...", v, s, v)


# ---------------------------------------------------------------------------
# analytic reference surfaces
# ---------------------------------------------------------------------------

class AnalyticSurface:
    """Exact signed distance function with closed-form derivatives."""

    name = "surface"

    def sdf(self, points) -> np.ndarray:
        return self.probe(points, 0)[0]

    def signed_distance(self, points) -> np.ndarray:
        return self.sdf(points)

    def probe(self, points, order: int = 2):
        raise NotImplementedError

    def implicit_probe(self, points) -> ImplicitProbe:
        return ImplicitProbe(*self.probe(points, 2))

    def sample(self, n: int, rng) -> VertexGeometry:
        raise NotImplementedError

    def area(self) -> float:
        raise NotImplementedError


class Sphere(AnalyticSurface):
    name = "sphere"

    def __init__(self, radius: float = 1.0):
        self.radius = float(radius)

    def probe(self, points, order: int = 2):
        p = np.asarray(points, dtype=np.float64)
        d = np.linalg.norm(p, axis=-1)
        value = d - self.radius
        if order == 0:
            return value, None, None
        with np.errstate(invalid="ignore", divide="ignore"):
            n = p / d[..., None]
        hess = None
        if order >= 2:
            hess = _projector(n) / d[..., None, None]
        return value, n, hess

    def area(self):
        return 4.0 * np.pi * self.radius**2

    def sample(self, n: int, rng) -> VertexGeometry:
        v = rng.normal(size=(n, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        # any orthonormal tangent frame; every point is umbilic
        helper = np.where(np.abs(v[:, :1]) < 0.9, [[1.0, 0, 0]], [[0, 1.0, 0]])
        e1 = np.cross(v, helper)
        e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
        e2 = np.cross(v, e1)
        k = np.full(n, 1.0 / self.radius)
        return VertexGeometry(self.radius * v, v, k, k.copy(), e1, e2,
                              np.full(n, self.area() / n), np.ones(n, dtype=bool))


class Torus(AnalyticSurface):
    """Torus around the z axis with ring radius ``major`` and tube radius ``minor``."""

    name = "torus"

    def __init__(self, major: float = 2.0, minor: float = 0.5):
        if not major > minor > 0:
            raise ValueError("need major > minor > 0")
        self.major = float(major)
        self.minor = float(minor)

    def probe(self, points, order: int = 2):
        p = np.asarray(points, dtype=np.float64)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        rho = np.hypot(x, y)
        q = rho - self.major
        d = np.hypot(q, z)
        value = d - self.minor
        if order == 0:
            return value, None, None
        with np.errstate(invalid="ignore", divide="ignore"):
            radial = np.stack([x / rho, y / rho, np.zeros_like(rho)], axis=-1)
            g_rho = q / d
            g_z = z / d
            ez = np.array([0.0, 0.0, 1.0])
            grad = g_rho[..., None] * radial + g_z[..., None] * ez
            hess = None
            if order >= 2:
                g_rr = z**2 / d**3
                g_zz = q**2 / d**3
                g_rz = -q * z / d**3
                planar = np.zeros(p.shape[:-1] + (3, 3))
                planar[..., 0, 0] = 1.0
                planar[..., 1, 1] = 1.0
                outer = radial[..., :, None] * radial[..., None, :]
                hess_rho = (planar - outer) / rho[..., None, None]
                rz = radial[..., :, None] * ez
                hess = (g_rho[..., None, None] * hess_rho
                        + g_rr[..., None, None] * radial[..., :, None] * radial[..., None, :]
                        + g_rz[..., None, None] * (rz + np.swapaxes(rz, -1, -2))
                        + g_zz[..., None, None] * np.outer(ez, ez))
        return value, grad, hess

    def area(self):
        return 4.0 * np.pi**2 * self.major * self.minor

    def parametrize(self, phi, theta):
        """Point, outward normal, tube direction and ring direction at ``(phi, theta)``.

        ``phi`` runs around the z axis, ``theta`` around the tube (0 on the
        outer equator).
        """
        phi = np.asarray(phi, dtype=np.float64)
        theta = np.asarray(theta, dtype=np.float64)
        cp, sp, ct, st = np.cos(phi), np.sin(phi), np.cos(theta), np.sin(theta)
        w = self.major + self.minor * ct
        point = np.stack([w * cp, w * sp, self.minor * st], axis=-1)
        normal = np.stack([ct * cp, ct * sp, st], axis=-1)
        tube = np.stack([-st * cp, -st * sp, ct], axis=-1)
        ring = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)
        return point, normal, tube, ring

    def principal_curvatures(self, theta):
        """``(k_tube, k_ring) = (1/r, cos t / (R + r cos t))``."""
        theta = np.asarray(theta, dtype=np.float64)
        ct = np.cos(theta)
        return np.full_like(ct, 1.0 / self.minor), ct / (self.major + self.minor * ct)

    def sample(self, n: int, rng) -> VertexGeometry:
        thetas = np.empty(0)
        bound = self.major + self.minor
        while thetas.size < n:
            t = rng.uniform(0.0, 2.0 * np.pi, size=2 * n)
            keep = rng.uniform(0.0, bound, size=2 * n) < self.major + self.minor * np.cos(t)
            thetas = np.concatenate([thetas, t[keep]])
        theta = thetas[:n]
        phi = rng.uniform(0.0, 2.0 * np.pi, size=n)
        point, normal, tube, ring = self.parametrize(phi, theta)
        k_tube, k_ring = self.principal_curvatures(theta)
        e2 = np.cross(normal, tube)
        return VertexGeometry(point, normal, k_tube, k_ring, tube, e2,
                              np.full(n, self.area() / n), np.zeros(n, dtype=bool))


class Plane(AnalyticSurface):
    """``f(p) = <n, p> - offset`` with unit ``n``."""

    name = "plane"

    def __init__(self, normal=(0.0, 0.0, 1.0), offset: float = 0.0):
        n = np.asarray(normal, dtype=np.float64)
        self.normal = n / np.linalg.norm(n)
        self.offset = float(offset)

    def probe(self, points, order: int = 2):
        p = np.asarray(points, dtype=np.float64)
        value = p @ self.normal - self.offset
        if order == 0:
            return value, None, None
        grad = np.broadcast_to(self.normal, p.shape).copy()
        hess = np.zeros(p.shape[:-1] + (3, 3)) if order >= 2 else None
        return value, grad, hess

    def sample(self, n: int, rng, half_width: float = 1.0) -> VertexGeometry:
        helper = np.array([1.0, 0, 0]) if abs(self.normal[0]) < 0.9 else np.array([0, 1.0, 0])
        e1 = np.cross(self.normal, helper)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(self.normal, e1)
        uv = rng.uniform(-half_width, half_width, size=(n, 2))
        pts = self.offset * self.normal + uv[:, :1] * e1 + uv[:, 1:] * e2
        zeros = np.zeros(n)
        return VertexGeometry(pts, np.tile(self.normal, (n, 1)), zeros, zeros.copy(),
                              np.tile(e1, (n, 1)), np.tile(e2, (n, 1)),
                              np.full(n, (2 * half_width) ** 2 / n), np.ones(n, dtype=bool))


def make_surface(kind: str, **params) -> AnalyticSurface:
    kinds = {"sphere": Sphere, "torus": Torus, "plane": Plane}
    if kind not in kinds:
        raise ValueError(f"unknown analytic surface {kind!r}")
    return kinds[kind](**params)


def probe_geometry(f, points) -> VertexGeometry:
    """Normals, principal curvatures and directions of the level sets of ``f`` at ``points``.

    Points where the gradient vanishes get NaN entries and are flagged.
    """
    p = np.atleast_2d(np.asarray(points, dtype=np.float64))
    _, g, h = f.probe(p, 2)
    ok = np.linalg.norm(g, axis=-1) > EPS_GRAD
    n = len(p)
    normals, e1, e2 = (np.full((n, 3), np.nan) for _ in range(3))
    k1, k2 = np.full(n, np.nan), np.full(n, np.nan)
    if ok.any():
        rep = curvatures(ImplicitProbe(None, g[ok], h[ok]))
        normals[ok], e1[ok], e2[ok] = rep.normal, rep.e1, rep.e2
        k1[ok], k2[ok] = rep.kappa1, rep.kappa2
    return VertexGeometry(p, normals, k1, k2, e1, e2, None, ~ok)
