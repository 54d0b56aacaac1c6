"""Per-point surface geometry shared by meshes, analytic surfaces and the sampler."""

from __future__ import annotations

import contextlib
import csv
from dataclasses import dataclass, field

import numpy as np


@dataclass
class VertexGeometry:
    """Oriented points with principal curvatures and directions (struct of arrays)."""

    points: np.ndarray
    normals: np.ndarray
    kappa1: np.ndarray
    kappa2: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    dual_area: np.ndarray | None = None
    # directions unreliable (umbilic, flat or boundary vertex)
    flagged: np.ndarray | None = field(default=None)

    def __post_init__(self):
        n = len(self.points)
        if self.flagged is None:
            self.flagged = np.zeros(n, dtype=bool)
        for name in ("normals", "e1", "e2"):
            if getattr(self, name).shape != (n, 3):
                raise ValueError(f"{name} must have shape ({n}, 3)")
        for name in ("kappa1", "kappa2"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have shape ({n},)")

    def __len__(self):
        return len(self.points)

    @property
    def feature(self) -> np.ndarray:
        """Sampling priority ``|k1| + |k2|``."""
        return np.abs(self.kappa1) + np.abs(self.kappa2)

    @property
    def kappa_gap(self) -> np.ndarray:
        return np.abs(self.kappa1 - self.kappa2)

    @property
    def gaussian(self) -> np.ndarray:
        return self.kappa1 * self.kappa2

    @property
    def mean(self) -> np.ndarray:
        return 0.5 * (self.kappa1 + self.kappa2)

    def subset(self, index) -> "VertexGeometry":
        return VertexGeometry(
            self.points[index], self.normals[index], self.kappa1[index],
            self.kappa2[index], self.e1[index], self.e2[index],
            None if self.dual_area is None else self.dual_area[index],
            self.flagged[index])


def write_geometry_csv(geometry: VertexGeometry, path) -> None:
    """Per-vertex dump: index, normal, k1, k2, e1, e2, feature."""
    header = ["index", "nx", "ny", "nz", "kappa1", "kappa2",
              "e1x", "e1y", "e1z", "e2x", "e2y", "e2z", "feature"]
    with text_sink(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        feature = geometry.feature
        for i in range(len(geometry)):
            writer.writerow([i, *map(_num, geometry.normals[i]),
                             _num(geometry.kappa1[i]), _num(geometry.kappa2[i]),
                             *map(_num, geometry.e1[i]), *map(_num, geometry.e2[i]),
                             _num(feature[i])])


@contextlib.contextmanager
def text_sink(target):
    """Yield ``target`` if it is a writable stream, else open it as a path."""
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", newline="") as fh:
            yield fh


def _num(v) -> str:
    return repr(float(v))
