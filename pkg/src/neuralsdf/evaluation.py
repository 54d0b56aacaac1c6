"""Reconstruction metrics and uniform-versus-biased sampling comparisons."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import binomtest

from .geometry import text_sink
from .sampler import BatchSpec
from .train import Dataset, TrainConfig, train

COLUMNS = ("method", "model", "domain_mean", "domain_max", "surface_mean", "surface_max",
           "align_mean", "align_max")

# evaluation RNG streams are keyed apart from every training stream
EVAL_STREAM = 0x5EED


@dataclass
class MetricReport:
    domain_mean: float
    domain_max: float
    surface_mean: float
    surface_max: float
    align_mean: float
    align_max: float
    n_surface: int
    n_domain: int
    repetitions: int
    stderr: dict = field(default_factory=dict)

    def row(self, method: str = "ours", model: str = "") -> list:
        return [method, model, self.domain_mean, self.domain_max, self.surface_mean,
                self.surface_max, self.align_mean, self.align_max]


def write_metrics_csv(rows, path) -> None:
    with text_sink(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for r in rows:
            writer.writerow([x if isinstance(x, str) else repr(float(x)) for x in r])


class MeshReference:
    """Reference for point-sampled surfaces: oracle distances and vertex normals."""

    def __init__(self, data: Dataset):
        self.data = data

    def signed_distance(self, points):
        return self.data.oracle.signed_distance(points)

    def sample(self, n: int, rng):
        return self.data.geometry.subset(rng.choice(len(self.data.geometry), n, replace=False)
                                         if n <= len(self.data.geometry)
                                         else rng.integers(len(self.data.geometry), size=n))


def _values(f, points):
    return np.asarray(f.probe(points, 0)[0], dtype=np.float64)


def _domain_points(reference, n, box, shell, rng):
    lo, hi = box
    out, have = [], 0
    while have < n:
        p = rng.uniform(lo, hi, size=(2 * (n - have) + 16, 3))
        p = p[np.abs(reference.signed_distance(p)) > shell]
        out.append(p)
        have += len(p)
    return np.concatenate(out)[:n]


def table1_metrics(candidate, reference, n_surface: int = 2500, repetitions: int = 100,
                   seed: int = 0, box=(-1.0, 1.0), n_domain: int | None = None,
                   shell: float = 0.01) -> MetricReport:
    """Domain, surface and normal-alignment errors of ``candidate`` against ``reference``.

    ``reference`` is an analytic surface (exact values and normals) or a
    :class:`MeshReference`.  Domain points are uniform in ``box`` outside a
    shell of half-width ``shell`` around the reference surface.  Each
    repetition draws fresh samples; means and maxima are averaged.
    """
    n_domain = n_surface if n_domain is None else n_domain
    rng = np.random.default_rng([seed, EVAL_STREAM])
    dm, dx, sm, sx, am, ax = ([] for _ in range(6))
    d_all, s_all, a_all = [], [], []
    for _ in range(repetitions):
        geo = reference.sample(n_surface, rng)
        v, g, _ = candidate.probe(geo.points, 1)
        s_err = np.abs(np.asarray(v) - reference.signed_distance(geo.points))
        r = np.linalg.norm(g, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            a_err = 1.0 - np.sum(g * geo.normals, axis=-1) / r
        a_err = np.where(r > 0, a_err, 1.0)
        dp = _domain_points(reference, n_domain, box, shell, rng)
        d_err = np.abs(_values(candidate, dp) - reference.signed_distance(dp))
        for errs, mean, mx, pool in ((d_err, dm, dx, d_all), (s_err, sm, sx, s_all),
                                     (a_err, am, ax, a_all)):
            mean.append(errs.mean())
            mx.append(errs.max())
            pool.append(errs)
    stderr = {k: float(np.std(np.concatenate(p)) / math.sqrt(sum(map(len, p))))
              for k, p in (("domain", d_all), ("surface", s_all), ("align", a_all))}
    return MetricReport(float(np.mean(dm)), float(np.mean(dx)), float(np.mean(sm)),
                        float(np.mean(sx)), float(np.mean(am)), float(np.mean(ax)),
                        n_surface, n_domain, repetitions, stderr)


# ---------------------------------------------------------------------------
# sampling comparison
# ---------------------------------------------------------------------------

def dirichlet_metric(net, data: Dataset) -> float:
    """Mean ``|f|`` over every on-surface sample of the dataset."""
    return float(np.mean(np.abs(_values(net, data.geometry.points))))


@dataclass
class ABReport:
    checkpoints: list
    uniform: np.ndarray         # (seeds, checkpoints)
    biased: np.ndarray
    seeds: list

    def medians(self, which: str) -> np.ndarray:
        return np.median(getattr(self, which), axis=0)

    def median_difference(self) -> np.ndarray:
        """Median over seeds of ``biased - uniform`` per checkpoint."""
        return np.median(self.biased - self.uniform, axis=0)

    def sign_test(self, k: int) -> float:
        """Two-sided sign test p-value for the paired differences at checkpoint ``k``."""
        diff = self.biased[:, k] - self.uniform[:, k]
        pos, neg = int(np.sum(diff > 0)), int(np.sum(diff < 0))
        if pos + neg == 0:
            return 1.0
        return float(binomtest(pos, pos + neg, 0.5).pvalue)

    def rows(self):
        for k, step in enumerate(self.checkpoints):
            yield [step, float(self.medians("uniform")[k]), float(self.medians("biased")[k]),
                   float(self.median_difference()[k]), self.sign_test(k)]


def sampling_ab_test(data: Dataset, uniform: TrainConfig, biased: TrainConfig, seeds,
                     budget: int, checkpoints=None) -> ABReport:
    """Train both configurations for ``budget`` steps per seed.

    The configurations must agree in everything except the batch
    fractions and sizes.  The on-surface Dirichlet metric is recorded at
    each checkpoint step (default: half and full budget).
    """
    seeds = list(seeds)
    if checkpoints is None:
        checkpoints = sorted({budget // 2, budget})
    checkpoints = list(checkpoints)
    if any(c < 0 or c > budget for c in checkpoints):
        raise ValueError("checkpoints must lie within the budget")
    neutral = dict(batch=None, partition=None, seed=0, max_steps=None, epochs=0)
    if replace(uniform, **neutral) != replace(biased, **neutral):
        raise ValueError("configurations differ beyond sampling fractions and batch sizes")
    out = {}
    for name, cfg in (("uniform", uniform), ("biased", biased)):
        table = np.empty((len(seeds), len(checkpoints)))
        for i, s in enumerate(seeds):
            spec = cfg.batch
            run = replace(cfg, seed=s, max_steps=budget, epochs=max(cfg.epochs, budget),
                          batch=BatchSpec(spec.m, spec.fractions, spec.m_off, spec.domain, s))

            def record(step, net, i=i, table=table):
                if step in checkpoints:
                    table[i, checkpoints.index(step)] = dirichlet_metric(net, data)

            train(run, data, callback=record)
        out[name] = table
    return ABReport(checkpoints, out["uniform"], out["biased"], seeds)
