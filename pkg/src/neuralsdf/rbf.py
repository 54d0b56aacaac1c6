"""Dense radial basis function interpolation, ``s(p) = sum_i l_i phi(|p - p_i|)``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.linalg.lapack import dgecon
from scipy.spatial import cKDTree

KERNELS = ("multiquadric", "thin-plate", "gaussian")
MAX_CENTERS = 6000
_CHUNK = 256


class RbfError(ValueError):
    pass


class RbfSingularError(RbfError):
    def __init__(self, message, rcond=None):
        super().__init__(message)
        self.rcond = rcond


def _kernel_terms(kind: str, r, c: float, order: int):
    """``phi(r)``, ``phi'(r)/r`` and ``(phi'/r)'/r`` as needed by ``order``."""
    if kind == "multiquadric":
        phi = np.sqrt(r * r + c * c)
        a = 1.0 / phi if order >= 1 else None
        b = -1.0 / phi**3 if order >= 2 else None
    elif kind == "gaussian":
        phi = np.exp(-(r / c) ** 2)
        a = -2.0 * phi / c**2 if order >= 1 else None
        b = 4.0 * phi / c**4 if order >= 2 else None
    elif kind == "thin-plate":
        with np.errstate(divide="ignore", invalid="ignore"):
            logr = np.where(r > 0, np.log(np.where(r > 0, r, 1.0)), 0.0)
            phi = r * r * logr
            a = 2.0 * logr + 1.0 if order >= 1 else None
            b = np.where(r > 0, 2.0 / (r * r), 0.0) if order >= 2 else None
    else:
        raise RbfError(f"unknown kernel {kind!r}; choose from {', '.join(KERNELS)}")
    return phi, a, b


def mean_spacing(points) -> float:
    """Mean distance from each point to its nearest neighbour."""
    d, _ = cKDTree(points).query(points, k=2)
    return float(d[:, 1].mean())


@dataclass
class RbfModel:
    centers: np.ndarray
    coefficients: np.ndarray
    kernel: str = "multiquadric"
    c: float = 1.0
    rcond: float = float("nan")
    residual: float = float("nan")

    def __post_init__(self):
        if len(self.centers) != len(self.coefficients):
            raise RbfError("one coefficient per center required")
        if self.kernel != "thin-plate" and not self.c > 0:
            raise RbfError("kernel parameter c must be positive")

    def probe(self, points, order: int = 1):
        """Value, gradient and Hessian of the interpolant, batched like the network probe."""
        p = np.asarray(points, dtype=np.float64)
        single = p.ndim == 1
        p = np.atleast_2d(p)
        values = np.empty(len(p))
        grads = np.empty((len(p), 3)) if order >= 1 else None
        hess = np.empty((len(p), 3, 3)) if order >= 2 else None
        lam = self.coefficients
        for s in range(0, len(p), _CHUNK):
            d = p[s:s + _CHUNK, None, :] - self.centers[None, :, :]
            r = np.linalg.norm(d, axis=-1)
            phi, a, b = _kernel_terms(self.kernel, r, self.c, order)
            values[s:s + _CHUNK] = phi @ lam
            if order >= 1:
                grads[s:s + _CHUNK] = np.einsum("qi,qij->qj", a * lam, d)
            if order >= 2:
                hess[s:s + _CHUNK] = ((a @ lam)[:, None, None] * np.eye(3)
                                      + np.einsum("qi,qij,qik->qjk", b * lam, d, d))
        if single:
            return values[0], None if grads is None else grads[0], None if hess is None else hess[0]
        return values, grads, hess

    def __call__(self, points):
        return self.probe(points, 0)[0]


def evaluate(model: RbfModel, points):
    return model(points)


def kernel_matrix(points, kernel: str, c: float) -> np.ndarray:
    d = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
    return _kernel_terms(kernel, d, c, 0)[0]


def fit(points, values, kernel: str = "multiquadric", c: float | None = None,
        rcond_min: float = 1e-15) -> RbfModel:
    """Interpolate ``values`` at ``points`` by a dense LU solve.

    ``c`` defaults to the mean nearest-neighbour spacing of the centers.
    Raises :class:`RbfSingularError` for duplicate centers or a reciprocal
    condition estimate below ``rcond_min``.
    """
    p = np.asarray(points, dtype=np.float64)
    f = np.asarray(values, dtype=np.float64).reshape(-1)
    if p.ndim != 2 or p.shape[1] != 3 or len(p) != len(f):
        raise RbfError("need matching (n, 3) points and n values")
    if len(p) > MAX_CENTERS:
        raise RbfError(f"{len(p)} centers exceed the dense solve budget of {MAX_CENTERS}")
    if kernel not in KERNELS:
        raise RbfError(f"unknown kernel {kernel!r}; choose from {', '.join(KERNELS)}")
    if len(np.unique(p, axis=0)) != len(p):
        raise RbfSingularError("duplicate centers make the system singular", 0.0)
    if c is None:
        c = mean_spacing(p) if len(p) > 1 else 1.0
    phi = kernel_matrix(p, kernel, c)
    lu, piv = lu_factor(phi, check_finite=True)
    rcond, info = dgecon(lu, np.abs(phi).sum(axis=0).max(), norm="1")
    if info != 0 or not rcond >= rcond_min:
        raise RbfSingularError(f"interpolation matrix is singular (rcond {rcond:.3g})", rcond)
    lam = lu_solve((lu, piv), f)
    # one step of refinement keeps the residual at round-off level
    lam += lu_solve((lu, piv), f - phi @ lam)
    residual = float(np.max(np.abs(phi @ lam - f))) if len(f) else 0.0
    return RbfModel(p, lam, kernel, float(c), float(rcond), residual)
