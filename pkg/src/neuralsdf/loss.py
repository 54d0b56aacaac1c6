"""Training loss terms and their parameter gradients.

Each term is a mean over a minibatch of a per-point quantity built from the
network value ``f``, gradient ``g`` and Hessian ``H``.  The private
``_*`` helpers return the term together with its adjoints ``(df, dg, dH)``
(derivatives of the *mean* with respect to every per-point input), which
:func:`loss_param_gradient` pushes through :func:`neuralsdf.net.backward`.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field

import numpy as np

from . import net as netmod
from .geometry import text_sink
from .implicit_geom import EPS_GRAD, UMBILIC_TOL, ImplicitProbe

TERMS = ("eikonal", "dirichlet_on", "dirichlet_off", "neumann", "dir_align",
         "curv_match", "siren_off")


class LossError(ValueError):
    pass


@dataclass
class LossWeights:
    w_eikonal: float = 50.0
    w_dirichlet_on: float = 3000.0
    w_dirichlet_off: float = 100.0
    w_neumann: float = 100.0
    w_dir_align: float = 10.0
    w_curv_match: float = 0.1
    curv_mode: str = "mean"          # off | principal | mean
    tau: float | None = None         # min |k1 - k2| for direction alignment
    w_siren_off: float = 0.0         # exp(-100|f|) off-surface penalty, baseline only

    def __post_init__(self):
        if self.curv_mode not in ("off", "principal", "mean"):
            raise LossError(f"unknown curvature mode {self.curv_mode!r}")
        for name, w in self.weights().items():
            if not (np.isfinite(w) and w >= 0):
                raise LossError(f"weight {name} must be finite and >= 0")

    @classmethod
    def basic(cls, **overrides) -> "LossWeights":
        """Eikonal + Dirichlet + Neumann only."""
        base = dict(w_dir_align=0.0, w_curv_match=0.0, curv_mode="off")
        base.update(overrides)
        return cls(**base)

    def weights(self) -> dict:
        w = {
            "eikonal": self.w_eikonal, "dirichlet_on": self.w_dirichlet_on,
            "dirichlet_off": self.w_dirichlet_off, "neumann": self.w_neumann,
            "dir_align": self.w_dir_align,
            "curv_match": self.w_curv_match if self.curv_mode != "off" else 0.0,
            "siren_off": self.w_siren_off,
        }
        return {k: float(v) for k, v in w.items()}

    def needs_hessian(self) -> bool:
        w = self.weights()
        return w["dir_align"] > 0 or w["curv_match"] > 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LossBreakdown:
    terms: dict
    weights: dict
    total: float
    counts: dict = field(default_factory=dict)

    def row(self) -> list:
        return [self.terms[t] for t in TERMS] + [self.total]


# ---------------------------------------------------------------------------
# per-term values and adjoints
# ---------------------------------------------------------------------------

def _norms(g):
    return np.linalg.norm(g, axis=-1)


def _eikonal(g):
    r = _norms(g)
    t = np.abs(1.0 - r)
    b = len(g)
    with np.errstate(invalid="ignore", divide="ignore"):
        dg = np.where(r[:, None] > 0, (np.sign(r - 1.0) / r)[:, None] * g, 0.0) / b
    return t.mean(), dg


def _dirichlet(values, targets):
    diff = values - targets
    return np.abs(diff).mean(), np.sign(diff) / len(values)


def _neumann(g, normals, eps=EPS_GRAD):
    r = _norms(g)
    if not np.all(np.isfinite(r)):
        return np.nan, np.zeros_like(g), 0       # left to the caller's divergence guard
    ok = r > eps
    if not ok.any():
        raise LossError("every on-surface gradient is degenerate")
    n = g[ok] / r[ok, None]
    cosine = np.sum(n * normals[ok], axis=1)
    k = int(ok.sum())
    dg = np.zeros_like(g)
    dg[ok] = -(normals[ok] - cosine[:, None] * n) / r[ok, None] / k
    return (1.0 - cosine).mean(), dg, len(g) - k


def _mean_curvature_and_grad(g, h):
    r = _norms(g)
    hs = 0.5 * (h + h.transpose(0, 2, 1))
    a = np.trace(hs, axis1=1, axis2=2)
    hg = np.einsum("bij,bj->bi", hs, g)
    q = np.sum(g * hg, axis=1)
    mean = a / (2 * r) - q / (2 * r**3)
    dh = (np.eye(3) / (2 * r)[:, None, None]
          - g[:, :, None] * g[:, None, :] / (2 * r**3)[:, None, None])
    dg = (-(a / (2 * r**3))[:, None] * g - hg / (r**3)[:, None]
          + (3 * q / (2 * r**5))[:, None] * g)
    return mean, dg, dh


def _shape_frame(g, h):
    """Shifted symmetric shape operator and its eigen decomposition."""
    r = _norms(g)
    n = g / r[:, None]
    p = np.eye(3) - n[:, :, None] * n[:, None, :]
    hs = 0.5 * (h + h.transpose(0, 2, 1))
    s = p @ hs @ p / r[:, None, None]
    mu = 1.0 + np.linalg.norm(s, axis=(1, 2))
    lam, vec = np.linalg.eigh(s - mu[:, None, None] * (n[:, :, None] * n[:, None, :]))
    return dict(r=r, n=n, p=p, hs=hs, s=s, mu=mu, lam=lam, vec=vec)


def _frame_backward(fr, lam_bar, vec_bar):
    """Adjoints of ``g`` and ``H`` from adjoints of the eigenpairs."""
    lam, v = fr["lam"], fr["vec"]
    diff = lam[:, None, :] - lam[:, :, None]            # lam_j - lam_i
    off = ~np.eye(3, dtype=bool)
    # repeated eigenvalues: eigenvector adjoints are undefined there and dropped
    f = np.zeros_like(diff)
    d = diff[:, off]
    f[:, off] = np.where(np.abs(d) > 0, 1.0 / np.where(d == 0, 1.0, d), 0.0)
    inner = f * (v.transpose(0, 2, 1) @ vec_bar)
    inner[:, np.arange(3), np.arange(3)] += lam_bar
    sbar = v @ inner @ v.transpose(0, 2, 1)
    sbar = 0.5 * (sbar + sbar.transpose(0, 2, 1))

    r, n, p, hs, s, mu = fr["r"], fr["n"], fr["p"], fr["hs"], fr["s"], fr["mu"]
    rr = r[:, None, None]
    hbar = p @ sbar @ p / rr
    pbar = (sbar @ p @ hs + hs @ p @ sbar) / rr
    r_bar = -np.sum(sbar * s, axis=(1, 2)) / r
    nn_bar = -pbar - mu[:, None, None] * sbar
    n_bar = np.einsum("bij,bj->bi", nn_bar + nn_bar.transpose(0, 2, 1), n)
    gbar = ((n_bar - np.sum(n * n_bar, axis=1, keepdims=True) * n) / r[:, None]
            + r_bar[:, None] * n)
    return gbar, hbar


def _curv_match(g, h, k1, k2, mean_true, mode, eps=EPS_GRAD):
    b = len(g)
    ok = _norms(g) > eps
    dg = np.zeros_like(g)
    dh = np.zeros_like(h)
    k = int(ok.sum())
    if k == 0:
        return 0.0, dg, dh, b
    if mode == "mean":
        m_theta, mg, mh = _mean_curvature_and_grad(g[ok], h[ok])
        diff = m_theta - mean_true[ok]
        sgn = np.sign(diff) / k
        dg[ok] = sgn[:, None] * mg
        dh[ok] = sgn[:, None, None] * mh
        return np.abs(diff).mean(), dg, dh, b - k
    fr = _shape_frame(g[ok], h[ok])
    d1 = fr["lam"][:, 2] - k1[ok]
    d2 = fr["lam"][:, 1] - k2[ok]
    lam_bar = np.zeros_like(fr["lam"])
    lam_bar[:, 2] = np.sign(d1) / k
    lam_bar[:, 1] = np.sign(d2) / k
    gb, hb = _frame_backward(fr, lam_bar, np.zeros_like(fr["vec"]))
    dg[ok], dh[ok] = gb, hb
    return (np.abs(d1) + np.abs(d2)).mean(), dg, dh, b - k


def _dir_align(g, h, e1_true, gap, tau, eps=EPS_GRAD):
    dg = np.zeros_like(g)
    dh = np.zeros_like(h)
    ok = (_norms(g) > eps) & (gap >= tau)
    if ok.any():
        fr = _shape_frame(g[ok], h[ok])
        k1, k2 = fr["lam"][:, 2], fr["lam"][:, 1]
        distinct = np.abs(k1 - k2) >= UMBILIC_TOL * np.maximum(1.0, np.abs(k1) + np.abs(k2))
        idx = np.flatnonzero(ok)
        ok[idx[~distinct]] = False
    k = int(ok.sum())
    if k == 0:
        return 0.0, dg, dh, 0
    fr = _shape_frame(g[ok], h[ok])
    v = fr["vec"][:, :, 2]
    dot = np.sum(v * e1_true[ok], axis=1)
    vec_bar = np.zeros_like(fr["vec"])
    vec_bar[:, :, 2] = (-2.0 * dot / k)[:, None] * e1_true[ok]
    gb, hb = _frame_backward(fr, np.zeros_like(fr["lam"]), vec_bar)
    dg[ok], dh[ok] = gb, hb
    return (1.0 - dot**2).mean(), dg, dh, k


def _siren_off(values):
    e = np.exp(-100.0 * np.abs(values))
    return e.mean(), -100.0 * np.sign(values) * e / len(values)


# ---------------------------------------------------------------------------
# public term functions (probes may be any implicit function's outputs)
# ---------------------------------------------------------------------------

def eikonal_term(probe: ImplicitProbe) -> float:
    """Mean of ``|1 - |grad f||``."""
    return float(_eikonal(np.atleast_2d(probe.gradient))[0])


def dirichlet_term(on_probe: ImplicitProbe, off_probe: ImplicitProbe, off_sdf):
    """``(mean |f| on surface, mean |f - sdf| off surface)``."""
    on = np.atleast_1d(on_probe.value)
    off = np.atleast_1d(off_probe.value)
    return (float(_dirichlet(on, 0.0)[0]) if on.size else 0.0,
            float(_dirichlet(off, np.atleast_1d(off_sdf))[0]) if off.size else 0.0)


def neumann_term(probe: ImplicitProbe, normals) -> float:
    return float(_neumann(np.atleast_2d(probe.gradient), np.atleast_2d(normals))[0])


def direction_alignment_term(probe: ImplicitProbe, e1, kappa_gap, tau: float = 0.0) -> float:
    """Mean of ``1 - <e1, (e1)_theta>^2`` over points with ``|k1 - k2| >= tau``."""
    g = np.atleast_2d(probe.gradient)
    h = np.asarray(probe.hessian).reshape(-1, 3, 3)
    return float(_dir_align(g, h, np.atleast_2d(e1), np.atleast_1d(kappa_gap), tau)[0])


def curvature_match_term(probe: ImplicitProbe, kappa1, kappa2, mode: str = "mean") -> float:
    """``|k1' - k1| + |k2' - k2|`` (principal) or ``|H' - H|`` (mean), averaged."""
    if mode not in ("principal", "mean"):
        raise LossError(f"unknown curvature mode {mode!r}")
    g = np.atleast_2d(probe.gradient)
    h = np.asarray(probe.hessian).reshape(-1, 3, 3)
    k1, k2 = np.atleast_1d(kappa1), np.atleast_1d(kappa2)
    return float(_curv_match(g, h, k1, k2, 0.5 * (k1 + k2), mode)[0])


# ---------------------------------------------------------------------------
# total loss on a minibatch
# ---------------------------------------------------------------------------

def _evaluate(values, grads, hess, batch, weights: LossWeights, with_grad: bool):
    m = batch.m
    w = weights.weights()
    tau = 0.0 if weights.tau is None else float(weights.tau)
    b = len(values)
    df = np.zeros(b)
    dg = np.zeros((b, 3))
    dh = np.zeros((b, 3, 3)) if hess is not None else None
    terms = dict.fromkeys(TERMS, 0.0)
    counts = {}

    # the constraint terms are always reported; curvature terms only when weighted
    terms["eikonal"], g_adj = _eikonal(grads)
    dg += w["eikonal"] * g_adj

    if m:
        terms["dirichlet_on"], f_adj = _dirichlet(values[:m], 0.0)
        df[:m] += w["dirichlet_on"] * f_adj
        terms["neumann"], g_adj, counts["neumann_skipped"] = _neumann(grads[:m], batch.normals)
        dg[:m] += w["neumann"] * g_adj
    if batch.m_off:
        terms["dirichlet_off"], f_adj = _dirichlet(values[m:], batch.off_sdf)
        df[m:] += w["dirichlet_off"] * f_adj
        if w["siren_off"] > 0:
            terms["siren_off"], f_adj = _siren_off(values[m:])
            df[m:] += w["siren_off"] * f_adj
    if w["dir_align"] > 0 and m:
        terms["dir_align"], g_adj, h_adj, counts["dir_align_points"] = _dir_align(
            grads[:m], hess[:m], batch.e1, batch.kappa_gap, tau)
        dg[:m] += w["dir_align"] * g_adj
        dh[:m] += w["dir_align"] * h_adj
    if w["curv_match"] > 0 and m:
        mean_true = 0.5 * (batch.kappa1 + batch.kappa2)
        terms["curv_match"], g_adj, h_adj, counts["curv_skipped"] = _curv_match(
            grads[:m], hess[:m], batch.kappa1, batch.kappa2, mean_true, weights.curv_mode)
        dg[:m] += w["curv_match"] * g_adj
        dh[:m] += w["curv_match"] * h_adj

    terms = {k: float(v) for k, v in terms.items()}
    total = float(sum(w[k] * terms[k] for k in TERMS))
    return LossBreakdown(terms, w, total, counts), (df, dg, dh)


def _batch_points(batch):
    return np.concatenate([batch.points, batch.off_points], axis=0)


def total_loss(fn, batch, weights: LossWeights) -> LossBreakdown:
    """Weighted loss of any implicit function exposing ``probe(points, order)``."""
    order = 2 if weights.needs_hessian() else 1
    values, grads, hess = fn.probe(_batch_points(batch), order)
    return _evaluate(values, grads, hess, batch, weights, False)[0]


def loss_param_gradient(net: netmod.SineMlp, batch, weights: LossWeights):
    """``(LossBreakdown, ParamTangent)`` of the weighted total loss."""
    order = 2 if weights.needs_hessian() else 1
    values, grads, hess, tape = netmod.probe_with_tape(net, _batch_points(batch), order)
    breakdown, (df, dg, dh) = _evaluate(values, grads, hess, batch, weights, True)
    return breakdown, netmod.backward(net, tape, df, dg, dh)


def write_breakdown_csv(rows, path) -> None:
    """``rows`` are ``(epoch, LossBreakdown)`` pairs."""
    with text_sink(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", *TERMS, "total"])
        for epoch, br in rows:
            writer.writerow([epoch, *(repr(float(x)) for x in br.row())])
