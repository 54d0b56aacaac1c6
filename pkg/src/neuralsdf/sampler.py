"""Curvature-biased minibatch sampling.

Vertices are sorted by the feature ``|k1| + |k2|`` and split into low,
medium and high feature classes ``V1, V2, V3``.  A minibatch draws
``p_i * m`` on-surface points from ``V_i`` and ``m_off`` off-surface points
uniformly in the domain box, labelled by an SDF oracle.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .geometry import VertexGeometry, text_sink


class SamplingError(ValueError):
    pass


def largest_remainder(total: int, fractions) -> np.ndarray:
    """Integer counts proportional to ``fractions`` summing exactly to ``total``."""
    f = np.asarray(fractions, dtype=np.float64)
    if np.any(f < 0) or not np.isclose(f.sum(), 1.0, atol=1e-9):
        raise SamplingError(f"fractions must be >= 0 and sum to 1, got {list(f)}")
    raw = f * total
    counts = np.floor(raw).astype(np.int64)
    short = total - counts.sum()
    if short:
        # stable: ties go to the earlier class
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


@dataclass
class Partition:
    order: np.ndarray          # vertex indices by ascending feature
    sizes: tuple
    feature: np.ndarray

    @property
    def n(self) -> int:
        return len(self.order)

    def classes(self) -> list[np.ndarray]:
        n1, n2, _ = self.sizes
        return [self.order[:n1], self.order[n1:n1 + n2], self.order[n1 + n2:]]

    def uniform_fractions(self) -> tuple:
        return tuple(s / self.n for s in self.sizes)

    def thresholds(self) -> tuple:
        """Feature value at the V1/V2 and V2/V3 boundaries."""
        n1, n2, _ = self.sizes
        f = self.feature[self.order]
        return float(f[n1]), float(f[n1 + n2])


def partition_by_curvature(feature, n1: int, n2: int, n3: int) -> Partition:
    """Split by ascending feature; equal features keep index order."""
    if isinstance(feature, VertexGeometry):
        feature = feature.feature
    feature = np.asarray(feature, dtype=np.float64)
    n = len(feature)
    if min(n1, n2, n3) <= 0 or n1 + n2 + n3 != n:
        raise SamplingError(f"class sizes {n1}+{n2}+{n3} must be positive and sum to {n}")
    order = np.argsort(feature, kind="stable")
    return Partition(order, (int(n1), int(n2), int(n3)), feature)


def partition_by_fractions(feature, fractions=(0.5, 0.4, 0.1)) -> Partition:
    """Partition with class sizes ``largest_remainder(n, fractions)``."""
    if isinstance(feature, VertexGeometry):
        feature = feature.feature
    return partition_by_curvature(feature, *largest_remainder(len(feature), fractions))


def epoch_plan(n: int, m: int) -> int:
    """Iterations per epoch, ``ceil(n / m)``."""
    if n <= 0 or m <= 0:
        raise SamplingError("n and m must be positive")
    return math.ceil(n / m)


@dataclass
class BatchSpec:
    """``fractions=None`` samples on-surface points uniformly over all vertices."""

    m: int
    fractions: tuple | None = None
    m_off: int | None = None
    domain: tuple = (-1.0, 1.0)
    seed: int = 0

    def __post_init__(self):
        if self.m <= 0:
            raise SamplingError("m must be positive")
        if self.m_off is None:
            self.m_off = self.m
        if self.m_off < 0:
            raise SamplingError("m_off must be non-negative")
        if self.fractions is not None:
            self.fractions = tuple(float(x) for x in self.fractions)
            largest_remainder(self.m, self.fractions)

    def class_counts(self) -> np.ndarray:
        return largest_remainder(self.m, self.fractions)

    def box(self):
        lo, hi = self.domain
        return (np.broadcast_to(np.asarray(lo, dtype=np.float64), (3,)),
                np.broadcast_to(np.asarray(hi, dtype=np.float64), (3,)))


@dataclass
class Minibatch:
    index: np.ndarray          # vertex ids of the on-surface entries
    points: np.ndarray
    normals: np.ndarray
    kappa1: np.ndarray
    kappa2: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    off_points: np.ndarray
    off_sdf: np.ndarray
    with_replacement: bool = False

    @property
    def kappa_gap(self) -> np.ndarray:
        return np.abs(self.kappa1 - self.kappa2)

    @property
    def m(self) -> int:
        return len(self.points)

    @property
    def m_off(self) -> int:
        return len(self.off_points)


def make_batch(geometry: VertexGeometry, index, off_points, off_sdf, replaced=False) -> Minibatch:
    index = np.asarray(index, dtype=np.int64)
    g = geometry
    return Minibatch(index, g.points[index], g.normals[index], g.kappa1[index],
                     g.kappa2[index], g.e1[index], g.e2[index],
                     np.asarray(off_points, dtype=np.float64).reshape(-1, 3),
                     np.asarray(off_sdf, dtype=np.float64).reshape(-1), replaced)


class CurvatureSampler:
    """Stateful minibatch source owning one RNG stream.

    Each class is visited without replacement: indices are drawn from a
    shuffled queue that is refilled (a new pass) once exhausted.
    """

    def __init__(self, geometry: VertexGeometry, spec: BatchSpec, oracle,
                 partition: Partition | None = None):
        self.geometry = geometry
        self.spec = spec
        self.oracle = oracle
        self.rng = np.random.default_rng(spec.seed)
        n = len(geometry)
        if spec.fractions is None:
            self.classes = [np.arange(n)]
            self.counts = np.array([spec.m])
        else:
            if partition is None:
                raise SamplingError("biased sampling needs a partition")
            self.classes = partition.classes()
            self.counts = spec.class_counts()
        for cls, k in zip(self.classes, self.counts):
            if k > 0 and len(cls) == 0:
                raise SamplingError("empty feature class with positive fraction")
        self._queues = [np.empty(0, dtype=np.int64) for _ in self.classes]

    def _draw(self, c: int, k: int):
        taken, replaced = [], k > len(self.classes[c])
        while k > 0:
            if not len(self._queues[c]):
                self._queues[c] = self.rng.permutation(self.classes[c])
            q = self._queues[c]
            taken.append(q[:k])
            self._queues[c] = q[k:]
            k -= len(taken[-1])
        return (np.concatenate(taken) if taken else np.empty(0, dtype=np.int64)), replaced

    def sample(self) -> Minibatch:
        parts, replaced = [], False
        for c, k in enumerate(self.counts):
            idx, rep = self._draw(c, int(k))
            parts.append(idx)
            replaced |= rep
        index = np.concatenate(parts)
        lo, hi = self.spec.box()
        off = self.rng.uniform(lo, hi, size=(self.spec.m_off, 3))
        sdf = self.oracle.signed_distance(off) if len(off) else np.zeros(0)
        return make_batch(self.geometry, index, off, sdf, replaced)


def sample_minibatch(partition: Partition | None, spec: BatchSpec, geometry: VertexGeometry,
                     oracle) -> Minibatch:
    """One minibatch from a fresh sampler seeded by ``spec.seed``."""
    return CurvatureSampler(geometry, spec, oracle, partition).sample()


def write_partition_csv(partition: Partition, path) -> None:
    """Class sizes and feature ranges, one row per class."""
    f = partition.feature
    with text_sink(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "size", "feature_min", "feature_max"])
        for name, cls in zip(("V1", "V2", "V3"), partition.classes()):
            writer.writerow([name, len(cls), repr(float(f[cls].min())), repr(float(f[cls].max()))])
