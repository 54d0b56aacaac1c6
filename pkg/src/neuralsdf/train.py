"""ADAM training loop for sinusoidal SDF networks."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import net as netmod
from .discrete_geom import TriMesh, vertex_geometry
from .geometry import VertexGeometry, text_sink
from .implicit_geom import AnalyticSurface
from .loss import TERMS, LossBreakdown, LossWeights, loss_param_gradient
from .oracle import SdfOracle
from .sampler import BatchSpec, CurvatureSampler, epoch_plan, partition_by_fractions

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    def __init__(self, message, net, logs):
        super().__init__(message)
        self.net = net
        self.logs = logs


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n))


def adam_step(state: AdamState, params: np.ndarray, gradient: np.ndarray, lr: float) -> np.ndarray:
    """Bias-corrected ADAM update; mutates ``state`` and returns new parameters."""
    if params.shape != gradient.shape or params.shape != state.m.shape:
        raise ValueError("parameter, gradient and moment shapes differ")
    state.step += 1
    state.m = state.beta1 * state.m + (1 - state.beta1) * gradient
    state.v = state.beta2 * state.v + (1 - state.beta2) * gradient**2
    m_hat = state.m / (1 - state.beta1**state.step)
    v_hat = state.v / (1 - state.beta2**state.step)
    return params - lr * m_hat / (np.sqrt(v_hat) + state.eps)


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

@dataclass
class Dataset:
    """Oriented on-surface samples with curvature, and an off-surface SDF oracle."""

    geometry: VertexGeometry
    oracle: object
    name: str = "data"
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    scale: float = 1.0
    surface: AnalyticSurface | None = None

    def metadata(self) -> dict:
        return {"source": self.name, "center": " ".join(map(repr, map(float, self.center))),
                "scale": repr(float(self.scale))}


def normalize_mesh(mesh: TriMesh, extent: float = 0.9):
    """Centroid to the origin and bounding box inside ``[-extent, extent]^3``."""
    center = mesh.vertices.mean(axis=0)
    scale = extent / np.max(np.abs(mesh.vertices - center))
    return TriMesh((mesh.vertices - center) * scale, mesh.faces.copy(), mesh.normals,
                   mesh.name), center, scale


def dataset_from_mesh(mesh: TriMesh, normalize: bool = True, k_sign: int = 8) -> Dataset:
    center, scale = np.zeros(3), 1.0
    if normalize:
        mesh, center, scale = normalize_mesh(mesh)
    geometry = vertex_geometry(mesh)
    good = np.all(np.isfinite(geometry.normals), axis=1) & np.isfinite(geometry.kappa1)
    if not good.all():
        log.warning("dropping %d vertices without geometry", int((~good).sum()))
        geometry = geometry.subset(good)
    return Dataset(geometry, SdfOracle(geometry.points, geometry.normals, k_sign), mesh.name,
                   center, scale)


def dataset_from_surface(surface: AnalyticSurface, n: int, seed: int = 0,
                         oracle: str = "exact", k_sign: int = 8) -> Dataset:
    """``n`` exact samples of an analytic surface.

    ``oracle="exact"`` labels off-surface points with the closed-form SDF;
    ``"kdtree"`` uses the point-sample oracle as for meshes.
    """
    geometry = surface.sample(n, np.random.default_rng(seed))
    if oracle == "exact":
        o = surface
    elif oracle == "kdtree":
        o = SdfOracle(geometry.points, geometry.normals, k_sign)
    else:
        raise ValueError(f"unknown oracle {oracle!r}")
    return Dataset(geometry, o, surface.name, surface=surface)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    layer_dims: list = field(default_factory=lambda: [3, 80, 80, 1])
    omega0: float = 30.0
    epochs: int = 500
    learning_rate: float = 1e-4
    batch: BatchSpec = field(default_factory=lambda: BatchSpec(m=2500))
    weights: LossWeights = field(default_factory=LossWeights.basic)
    partition: tuple = (0.5, 0.4, 0.1)
    seed: int = 0
    max_steps: int | None = None
    checkpoint_every: int = 0
    checkpoint_path: str | None = None

    def __post_init__(self):
        if self.epochs < 0 or not self.learning_rate > 0:
            raise netmod.ConfigurationError("epochs must be >= 0 and learning rate > 0")


@dataclass
class EpochLog:
    epoch: int
    breakdown: LossBreakdown
    seconds: float
    points: int


def _mean_breakdown(items: list[LossBreakdown]) -> LossBreakdown:
    terms = {t: float(np.mean([b.terms[t] for b in items])) for t in TERMS}
    weights = items[0].weights
    total = float(sum(weights[t] * terms[t] for t in TERMS))
    return LossBreakdown(terms, weights, total)


def train(config: TrainConfig, data: Dataset, callback=None):
    """Run ``epochs * ceil(n/m)`` ADAM steps; returns ``(net, logs)``.

    ``callback(step, net)`` is invoked before the first step and after
    every step.  ``max_steps`` caps the total number of steps.
    """
    net = netmod.init_siren(config.layer_dims, config.omega0, config.seed)
    weights = config.weights
    if weights.tau is None and weights.w_dir_align > 0:
        weights = LossWeights(**{**weights.to_dict(),
                                 "tau": float(np.percentile(data.geometry.kappa_gap, 60))})
    spec = config.batch
    partition = None
    if spec.fractions is not None:
        partition = partition_by_fractions(data.geometry, config.partition)
    sampler = CurvatureSampler(data.geometry, spec, data.oracle, partition)
    steps_per_epoch = epoch_plan(len(data.geometry), spec.m)
    state = AdamState.zeros(net.n_parameters)
    params = net.flat_parameters()
    logs: list[EpochLog] = []
    step = 0
    if callback is not None:
        callback(0, net)
    for epoch in range(1, config.epochs + 1):
        if config.max_steps is not None and step >= config.max_steps:
            break
        t0 = time.perf_counter()
        items, visited = [], 0
        for _ in range(steps_per_epoch):
            if config.max_steps is not None and step >= config.max_steps:
                break
            batch = sampler.sample()
            breakdown, tangent = loss_param_gradient(net, batch, weights)
            grad = tangent.flat()
            if not (np.isfinite(breakdown.total) and np.all(np.isfinite(grad))):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}", net, logs)
            params = adam_step(state, params, grad, config.learning_rate)
            if not np.all(np.isfinite(params)):
                raise TrainingDiverged(f"non-finite parameters at epoch {epoch}", net, logs)
            net = netmod.SineMlp.from_flat(config.layer_dims, config.omega0, params)
            items.append(breakdown)
            visited += batch.m
            step += 1
            if callback is not None:
                callback(step, net)
        entry = EpochLog(epoch, _mean_breakdown(items), time.perf_counter() - t0, visited)
        logs.append(entry)
        log.info("epoch %d  loss %.6g  (%.2fs)", epoch, entry.breakdown.total, entry.seconds)
        every = config.checkpoint_every
        if every and config.checkpoint_path and epoch % every == 0:
            netmod.save_checkpoint(net, config.checkpoint_path,
                                   {**data.metadata(), "epoch": epoch, "seed": config.seed})
    return net, logs


def write_epoch_csv(logs: list[EpochLog], path) -> None:
    with text_sink(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", *TERMS, "total", "seconds", "points"])
        for e in logs:
            writer.writerow([e.epoch, *(repr(float(x)) for x in e.breakdown.row()),
                             repr(e.seconds), e.points])
