"""Approximate signed distance to an oriented point sample.

``|f(p)|`` is the distance to the nearest sample; the sign is the majority
vote of ``<p - p_j, N_j>`` over the ``k_sign`` nearest samples (ties count
as outside).
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree


class SdfOracle:
    def __init__(self, points, normals, k_sign: int = 8):
        self.points = np.asarray(points, dtype=np.float64)
        self.normals = np.asarray(normals, dtype=np.float64)
        if len(self.points) == 0:
            raise ValueError("oracle needs at least one sample point")
        if self.normals.shape != self.points.shape:
            raise ValueError("one normal per point required")
        self.k_sign = int(min(max(k_sign, 1), len(self.points)))
        self.tree = cKDTree(self.points)

    def __len__(self):
        return len(self.points)

    def unsigned_distance(self, p) -> np.ndarray:
        d, _ = self.tree.query(np.asarray(p, dtype=np.float64), k=1)
        return d

    def nearest(self, p):
        return self.tree.query(np.asarray(p, dtype=np.float64), k=1)

    def sign_estimate(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        _, idx = self.tree.query(p, k=self.k_sign)
        if self.k_sign == 1:
            idx = idx[..., None]
        votes = np.sign(np.sum((p[..., None, :] - self.points[idx]) * self.normals[idx], axis=-1))
        return np.where(votes.sum(axis=-1) >= 0, 1.0, -1.0)

    def signed_distance(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        return self.sign_estimate(p) * self.unsigned_distance(p)


def brute_force_distance(points, p) -> np.ndarray:
    """Linear scan reference for :meth:`SdfOracle.unsigned_distance`."""
    points = np.asarray(points, dtype=np.float64)
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    out = np.empty(len(p))
    for i in range(0, len(p), 256):
        chunk = p[i:i + 256]
        d2 = np.sum((chunk[:, None, :] - points[None, :, :]) ** 2, axis=-1)
        out[i:i + 256] = np.sqrt(d2.min(axis=1))
    return out
