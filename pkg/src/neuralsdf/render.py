"""Sphere tracing and shading of implicit functions.

Any object with ``probe(points, order) -> (values, gradients, hessians)``
can be rendered: trained networks and the analytic surfaces alike.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .implicit_geom import (EPS_GRAD, AnalyticSurface, ImplicitProbe, curvatures,
                            gaussian_curvature, mean_curvature)

MODES = ("phong", "gaussian", "mean", "ward")

BLUE = np.array([0.0, 0.0, 1.0])
WHITE = np.array([1.0, 1.0, 1.0])
RED = np.array([1.0, 0.0, 0.0])


class RenderError(ValueError):
    pass


def _unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


@dataclass
class Camera:
    position: tuple = (0.0, 0.0, -3.0)
    look_at: tuple = (0.0, 0.0, 0.0)
    up: tuple = (0.0, 1.0, 0.0)
    fov: float = 45.0
    width: int = 256
    height: int = 256

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise RenderError("image dimensions must be positive")
        if not 0 < self.fov < 180:
            raise RenderError("field of view must lie in (0, 180) degrees")
        view = np.subtract(self.look_at, self.position)
        if np.linalg.norm(view) == 0:
            raise RenderError("camera position equals look-at point")
        if np.linalg.norm(np.cross(view, self.up)) < 1e-12 * np.linalg.norm(view):
            raise RenderError("up vector is collinear with the view direction")

    def basis(self):
        forward = _unit(np.subtract(self.look_at, self.position))
        right = _unit(np.cross(forward, self.up))
        up = np.cross(right, forward)
        return forward, right, up

    def rays(self):
        """Unit directions through pixel centres, shape ``(height, width, 3)``."""
        forward, right, up = self.basis()
        half = np.tan(np.radians(self.fov) / 2)
        aspect = self.width / self.height
        u = ((np.arange(self.width) + 0.5) / self.width * 2 - 1) * half * aspect
        v = (1 - (np.arange(self.height) + 0.5) / self.height * 2) * half
        d = forward + u[None, :, None] * right + v[:, None, None] * up
        return _unit(d)


@dataclass
class RenderConfig:
    mode: str = "phong"
    iterations: int = 80
    eps_hit: float = 1e-4
    t_max: float = 10.0
    damping: float | None = None       # None: 1 for exact SDFs, 0.9 otherwise
    light: tuple | None = None         # direction towards the light; None = headlight
    alpha1: float = 0.2
    alpha2: float = 0.5
    curvature_range: tuple = (-2.0, 2.0)
    background: tuple = (0.0, 0.0, 0.0)
    base_color: tuple = (0.75, 0.75, 0.75)

    def __post_init__(self):
        if self.mode not in MODES:
            raise RenderError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        if self.iterations <= 0 or not self.eps_hit > 0:
            raise RenderError("iterations and hit threshold must be positive")
        if not (self.alpha1 > 0 and self.alpha2 > 0):
            raise RenderError("ward roughness parameters must be positive")
        lo, hi = self.curvature_range
        if not hi > lo:
            raise RenderError("curvature range must satisfy c_lo < c_hi")


@dataclass
class TraceResult:
    hit: np.ndarray
    t: np.ndarray
    points: np.ndarray
    iterations: np.ndarray


def _value(f, p):
    return np.asarray(f.probe(p, 0)[0], dtype=np.float64)


def sphere_trace(f, origins, directions, iterations: int = 80, eps_hit: float = 1e-4,
                 t_max: float = 10.0, damping: float = 1.0, t_start: float = 0.0) -> TraceResult:
    """March ``p <- p + damping * f(p) * d`` until ``|f| < eps_hit``.

    A single origin/direction pair returns scalar fields; batches are
    marched together, retiring each ray as soon as it hits or leaves
    ``[0, t_max]``.
    """
    o = np.asarray(origins, dtype=np.float64)
    d = np.asarray(directions, dtype=np.float64)
    single = d.ndim == 1
    o, d = np.broadcast_arrays(np.atleast_2d(o), np.atleast_2d(d))
    n = len(d)
    t = np.full(n, float(t_start))
    hit = np.zeros(n, dtype=bool)
    steps = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    for _ in range(iterations):
        if not len(active):
            break
        p = o[active] + t[active, None] * d[active]
        v = _value(f, p)
        done = np.abs(v) < eps_hit
        hit[active[done]] = True
        live = active[~done]
        t[live] += damping * v[~done]
        steps[live] += 1
        alive = (t[live] <= t_max) & (t[live] >= 0)
        active = live[alive]
    points = o + t[:, None] * d
    if single:
        return TraceResult(bool(hit[0]), float(t[0]), points[0], int(steps[0]))
    return TraceResult(hit, t, points, steps)


def ward_kspec(normal, light, view, v1, v2, alpha1: float, alpha2: float):
    """Anisotropic Ward specular coefficient; zero where the light or viewer is behind."""
    nl = np.sum(normal * light, axis=-1)
    nv = np.sum(normal * view, axis=-1)
    h = _unit(view + light)
    a = np.sum(h * v1, axis=-1) / alpha1
    b = np.sum(h * v2, axis=-1) / alpha2
    nh = np.sum(normal * h, axis=-1)
    front = (nl > 0) & (nv > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.exp(-2.0 * (a**2 + b**2) / (1.0 + nh)) / (
            4 * np.pi * alpha1 * alpha2 * np.sqrt(nl * nv))
    return np.where(front, k, 0.0)


def transfer(c, lo: float, hi: float):
    """Linear blue-white-red map of ``c`` over ``[lo, hi]`` with clamping."""
    s = np.clip((np.asarray(c, dtype=np.float64) - lo) / (hi - lo), 0.0, 1.0)[..., None]
    low = BLUE + (WHITE - BLUE) * (2 * s)
    high = WHITE + (RED - WHITE) * (2 * s - 1)
    return np.where(s < 0.5, low, high)


def shade(f, points, view, config: RenderConfig):
    """Colours in ``[0, 1]`` for surface ``points`` seen along ``-view``.

    ``view`` points from the surface towards the observer.  Returns
    ``(colors, singular)`` where ``singular`` marks points whose gradient
    vanishes; they receive the background colour.
    """
    points = np.atleast_2d(points)
    view = _unit(np.broadcast_to(view, points.shape))
    order = 1 if config.mode == "phong" else 2
    _, g, h = f.probe(points, order)
    g = np.atleast_2d(g)
    r = np.linalg.norm(g, axis=-1)
    singular = ~(r > EPS_GRAD)
    colors = np.broadcast_to(np.asarray(config.background, dtype=np.float64), points.shape).copy()
    ok = ~singular
    if not ok.any():
        return colors, singular
    n = g[ok] / r[ok, None]
    v = view[ok]
    light = v if config.light is None else np.broadcast_to(_unit(config.light), v.shape)
    nl = np.clip(np.sum(n * light, axis=-1), 0.0, None)
    base = np.asarray(config.base_color)
    if config.mode == "phong":
        refl = 2 * np.sum(n * light, axis=-1)[:, None] * n - light
        spec = np.clip(np.sum(refl * v, axis=-1), 0.0, None) ** 32
        c = 0.1 * base + 0.7 * base * nl[:, None] + 0.3 * spec[:, None]
    else:
        h = np.asarray(h).reshape(-1, 3, 3)
        probe = ImplicitProbe(None, g[ok], h[ok])
        if config.mode == "gaussian":
            c = transfer(gaussian_curvature(probe), *config.curvature_range)
        elif config.mode == "mean":
            c = transfer(mean_curvature(probe), *config.curvature_range)
        else:
            rep = curvatures(probe)
            k = ward_kspec(n, light, v, rep.e1, rep.e2, config.alpha1, config.alpha2)
            c = 0.6 * base * nl[:, None] + 0.4 * (k * nl)[:, None]
    colors[ok] = np.clip(c, 0.0, 1.0)
    return colors, singular


@dataclass
class Image:
    pixels: np.ndarray                 # (height, width, 3) uint8
    hit: np.ndarray
    singular: int = 0
    stats: dict = field(default_factory=dict)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def to_ppm(self) -> bytes:
        header = f"P6\n{self.width} {self.height}\n255\n".encode("ascii")
        return header + np.ascontiguousarray(self.pixels, dtype=np.uint8).tobytes()


def _quantize(c):
    return np.clip(np.rint(np.asarray(c) * 255.0), 0, 255).astype(np.uint8)


def render(f, camera: Camera, config: RenderConfig | None = None) -> Image:
    config = config or RenderConfig()
    damping = config.damping
    if damping is None:
        damping = 1.0 if isinstance(f, AnalyticSurface) else 0.9
    dirs = camera.rays().reshape(-1, 3)
    origin = np.asarray(camera.position, dtype=np.float64)
    tr = sphere_trace(f, origin, dirs, config.iterations, config.eps_hit, config.t_max, damping)
    colors = np.broadcast_to(np.asarray(config.background, dtype=np.float64), dirs.shape).copy()
    singular = np.zeros(len(dirs), dtype=bool)
    if tr.hit.any():
        c, s = shade(f, tr.points[tr.hit], -dirs[tr.hit], config)
        colors[tr.hit] = c
        singular[np.flatnonzero(tr.hit)[s]] = True
    h, w = camera.height, camera.width
    return Image(_quantize(colors).reshape(h, w, 3), tr.hit.reshape(h, w), int(singular.sum()),
                 {"hits": int(tr.hit.sum()), "mean_iterations": float(tr.iterations.mean())})


def write_ppm(image: Image, path) -> None:
    with open(path, "wb") as fh:
        fh.write(image.to_ppm())


def read_ppm(path) -> np.ndarray:
    """Parse a binary P6 file written by :func:`write_ppm`."""
    with open(path, "rb") as fh:
        data = fh.read()
    m = re.match(rb"P6\s+(\d+)\s+(\d+)\s+255\s", data)
    if m is None:
        raise RenderError("not an 8-bit P6 file")
    w, h = int(m.group(1)), int(m.group(2))
    pix = np.frombuffer(data[m.end():], dtype=np.uint8)
    if pix.size != w * h * 3:
        raise RenderError("truncated pixel data")
    return pix.reshape(h, w, 3)


def write_png(image: Image, path) -> None:
    try:
        from PIL import Image as PilImage
    except ImportError as exc:
        raise RenderError("PNG output needs Pillow; write a .ppm instead") from exc
    PilImage.fromarray(image.pixels, "RGB").save(path)
