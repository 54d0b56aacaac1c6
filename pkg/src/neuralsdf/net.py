"""Sinusoidal MLP with closed-form input derivatives.

The network is ``f(p) = W_n(f_{n-1} o ... o f_0(p)) + b_n`` with
``f_0(p) = sin(omega0 * (W_0 p + b_0))`` and ``f_i(x) = sin(W_i x + b_i)``.

Input derivatives are carried forward layer by layer in a stacked
"channel" layout: for a batch of ``B`` points every layer holds an array of
shape ``(B, C, N)`` where channel 0 is the activation, channels 1..3 its
gradient with respect to the input point and channels 4..12 its Hessian
(row-major 3x3).  An affine layer then acts on every channel with a single
matrix product, and the reverse pass (parameter gradients of losses built
from value, gradient and Hessian) is the transpose of the same products.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

FORMAT_VERSION = 1

_CHANNELS = {0: 1, 1: 4, 2: 13}


class ConfigurationError(ValueError):
    """Invalid network or experiment configuration."""


class CheckpointError(Exception):
    """Base class for checkpoint loading failures."""


class CheckpointCorruptError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointDimensionError(CheckpointError):
    pass


@dataclass
class SineMlp:
    """Weights ``W_i`` of shape ``(N_{i+1}, N_i)`` and biases ``b_i``."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    omega0: float = 30.0

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ConfigurationError("need one bias per weight matrix")
        if not self.omega0 > 0:
            raise ConfigurationError("omega0 must be positive")
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        _check_dims(self.layer_dims)
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ConfigurationError("bias does not match weight rows")
        for prev, nxt in zip(self.weights[:-1], self.weights[1:]):
            if nxt.shape[1] != prev.shape[0]:
                raise ConfigurationError("layer dimensions do not chain")

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def n_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def flat_parameters(self) -> np.ndarray:
        """Layer-major, row-major: ``W_0, b_0, W_1, b_1, ...``."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    @classmethod
    def from_flat(cls, layer_dims, omega0, flat) -> "SineMlp":
        _check_dims(layer_dims)
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != parameter_count(layer_dims):
            raise ConfigurationError(
                f"expected {parameter_count(layer_dims)} parameters, got {flat.size}")
        weights, biases, k = [], [], 0
        for n_in, n_out in zip(layer_dims[:-1], layer_dims[1:]):
            weights.append(flat[k:k + n_in * n_out].reshape(n_out, n_in).copy())
            k += n_in * n_out
            biases.append(flat[k:k + n_out].copy())
            k += n_out
        return cls(weights, biases, float(omega0))

    def copy(self) -> "SineMlp":
        return SineMlp([w.copy() for w in self.weights],
                       [b.copy() for b in self.biases], self.omega0)

    def probe(self, points, order: int = 1):
        return probe(self, points, order)


@dataclass
class ParamTangent:
    """Gradient of a scalar with respect to every network parameter."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def zeros_like(cls, net: SineMlp) -> "ParamTangent":
        return cls([np.zeros_like(w) for w in net.weights],
                   [np.zeros_like(b) for b in net.biases])

    def flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def scaled(self, s: float) -> "ParamTangent":
        return ParamTangent([s * w for w in self.weights], [s * b for b in self.biases])

    def __add__(self, other: "ParamTangent") -> "ParamTangent":
        return ParamTangent([a + b for a, b in zip(self.weights, other.weights)],
                            [a + b for a, b in zip(self.biases, other.biases)])


def parameter_count(layer_dims) -> int:
    return sum(a * b + b for a, b in zip(layer_dims[:-1], layer_dims[1:]))


def _check_dims(layer_dims):
    dims = list(layer_dims)
    if len(dims) < 2 or dims[0] != 3 or dims[-1] != 1:
        raise ConfigurationError(f"layer dims must start with 3 and end with 1, got {dims}")
    if any(int(d) != d or d < 1 for d in dims):
        raise ConfigurationError(f"layer dims must be positive integers, got {dims}")


def init_siren(layer_dims, omega0: float = 30.0, seed: int = 0) -> SineMlp:
    """SIREN initialization.

    First layer weights ~ U(-1/3, 1/3); every later layer ~
    U(-sqrt(6/N_in)/omega0, sqrt(6/N_in)/omega0).  Biases follow the usual
    fan-in rule U(-1/sqrt(N_in), 1/sqrt(N_in)).
    """
    dims = list(layer_dims)
    _check_dims(dims)
    if not omega0 > 0:
        raise ConfigurationError("omega0 must be positive")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for i, (n_in, n_out) in enumerate(zip(dims[:-1], dims[1:])):
        bound = 1.0 / n_in if i == 0 else np.sqrt(6.0 / n_in) / omega0
        weights.append(rng.uniform(-bound, bound, size=(n_out, n_in)))
        biases.append(rng.uniform(-1.0, 1.0, size=n_out) / np.sqrt(n_in))
    return SineMlp(weights, biases, float(omega0))


# ---------------------------------------------------------------------------
# forward propagation of value / gradient / Hessian channels
# ---------------------------------------------------------------------------

@dataclass
class Tape:
    """Intermediate arrays kept for the reverse pass."""

    order: int
    inputs: list = field(default_factory=list)   # X fed to each layer
    pre: list = field(default_factory=list)      # Z after each hidden affine map
    sin: list = field(default_factory=list)
    cos: list = field(default_factory=list)


def _as_batch(points):
    p = np.asarray(points, dtype=np.float64)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    if p.shape[-1] != 3:
        raise ValueError(f"points must have 3 coordinates, got shape {p.shape}")
    return p, single


def _input_channels(p, order):
    x = np.zeros((p.shape[0], _CHANNELS[order], 3))
    x[:, 0, :] = p
    if order >= 1:
        x[:, 1:4, :] = np.eye(3)
    return x


def _sine(z, order):
    s = np.sin(z[:, 0, :])
    c = np.cos(z[:, 0, :])
    y = np.empty_like(z)
    y[:, 0, :] = s
    if order >= 1:
        zj = z[:, 1:4, :]
        y[:, 1:4, :] = c[:, None, :] * zj
    if order >= 2:
        b, _, n = z.shape
        zh = z[:, 4:13, :].reshape(b, 3, 3, n)
        zz = zj[:, :, None, :] * zj[:, None, :, :]
        yh = c[:, None, None, :] * zh - s[:, None, None, :] * zz
        y[:, 4:13, :] = yh.reshape(b, 9, n)
    return y, s, c


def _propagate(net: SineMlp, p: np.ndarray, order: int, tape: Tape | None = None):
    x = _input_channels(p, order)
    n_hidden = len(net.weights) - 1
    for i in range(n_hidden):
        w, bias = net.weights[i], net.biases[i]
        z = x @ w.T
        z[:, 0, :] += bias
        if i == 0:
            z *= net.omega0
        y, s, c = _sine(z, order)
        if tape is not None:
            tape.inputs.append(x)
            tape.pre.append(z)
            tape.sin.append(s)
            tape.cos.append(c)
        x = y
    if tape is not None:
        tape.inputs.append(x)
    out = x @ net.weights[-1].T
    out[:, 0, :] += net.biases[-1]
    return out[:, :, 0]


def _split(out, order, single):
    b = out.shape[0]
    values = out[:, 0]
    grads = out[:, 1:4] if order >= 1 else None
    hess = None
    if order >= 2:
        hess = out[:, 4:13].reshape(b, 3, 3)
        hess = 0.5 * (hess + hess.transpose(0, 2, 1))
    if single:
        values = values[0]
        grads = None if grads is None else grads[0]
        hess = None if hess is None else hess[0]
    return values, grads, hess


def probe(net: SineMlp, points, order: int = 2):
    """Value, input gradient and input Hessian (``order`` 0, 1 or 2).

    Returns ``(values, gradients, hessians)``; entries above ``order`` are
    ``None``.  ``points`` may be a single point ``(3,)`` or a batch ``(B, 3)``.
    """
    p, single = _as_batch(points)
    return _split(_propagate(net, p, order), order, single)


def forward(net: SineMlp, points):
    p, single = _as_batch(points)
    out = _propagate(net, p, 0)[:, 0]
    return float(out[0]) if single else out


def input_gradient(net: SineMlp, points):
    return probe(net, points, 1)[1]


def input_hessian(net: SineMlp, points):
    return probe(net, points, 2)[2]


def probe_with_tape(net: SineMlp, points, order: int):
    p, _ = _as_batch(points)
    tape = Tape(order)
    out = _propagate(net, p, order, tape)
    return _split(out, order, False) + (tape,)


def _sine_backward(ybar, z, s, c, order):
    zbar = np.empty_like(ybar)
    sbar = ybar[:, 0, :].copy()
    cbar = np.zeros_like(sbar)
    if order >= 1:
        zj = z[:, 1:4, :]
        yj_bar = ybar[:, 1:4, :]
        cbar += np.sum(yj_bar * zj, axis=1)
        zbar[:, 1:4, :] = c[:, None, :] * yj_bar
    if order >= 2:
        b, _, n = z.shape
        yh_bar = ybar[:, 4:13, :].reshape(b, 3, 3, n)
        zh = z[:, 4:13, :].reshape(b, 3, 3, n)
        zbar[:, 4:13, :] = (c[:, None, None, :] * yh_bar).reshape(b, 9, n)
        cbar += np.sum(yh_bar * zh, axis=(1, 2))
        # d/dJz of Jz^T A Jz is (A + A^T) Jz
        sym = yh_bar + yh_bar.transpose(0, 2, 1, 3)
        sym_j = np.sum(sym * zj[:, None, :, :], axis=2)
        sbar -= np.sum(sym_j * zj, axis=1) * 0.5
        zbar[:, 1:4, :] -= s[:, None, :] * sym_j
    zbar[:, 0, :] = c * sbar - s * cbar
    return zbar


def backward(net: SineMlp, tape: Tape, dvalues, dgrads=None, dhess=None) -> ParamTangent:
    """Parameter gradient of ``sum(dvalues*f + dgrads.grad f + dhess:Hf)``."""
    order = tape.order
    dvalues = np.asarray(dvalues, dtype=np.float64)
    b = dvalues.shape[0]
    ybar = np.zeros((b, _CHANNELS[order], 1))
    ybar[:, 0, 0] = dvalues
    if order >= 1 and dgrads is not None:
        ybar[:, 1:4, 0] = dgrads
    if order >= 2 and dhess is not None:
        dh = np.asarray(dhess)
        ybar[:, 4:13, 0] = (0.5 * (dh + dh.transpose(0, 2, 1))).reshape(b, 9)

    tangent = ParamTangent.zeros_like(net)
    n_layers = len(net.weights)
    for i in range(n_layers - 1, -1, -1):
        x = tape.inputs[i]
        if i < n_layers - 1:
            ybar = _sine_backward(ybar, tape.pre[i], tape.sin[i], tape.cos[i], order)
            if i == 0:
                ybar = ybar * net.omega0
        w = net.weights[i]
        n_out, n_in = w.shape
        tangent.weights[i] = ybar.reshape(-1, n_out).T @ x.reshape(-1, n_in)
        tangent.biases[i] = ybar[:, 0, :].sum(axis=0)
        if i > 0:
            ybar = ybar @ w
    return tangent


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(net: SineMlp, path, metadata: dict | None = None) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "layer_dims": net.layer_dims,
        "omega0": net.omega0,
        "parameters": net.flat_parameters().tolist(),
        "metadata": {str(k): str(v) for k, v in (metadata or {}).items()},
    }
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def read_checkpoint(path) -> tuple[SineMlp, dict]:
    """Load a checkpoint and its metadata."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CheckpointCorruptError(f"{path}: not a valid checkpoint ({exc})") from exc
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise CheckpointCorruptError(f"{path}: missing format_version")
    if doc["format_version"] != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"{path}: unsupported format_version {doc['format_version']!r}")
    try:
        dims = [int(d) for d in doc["layer_dims"]]
        omega0 = float(doc["omega0"])
        params = np.asarray(doc["parameters"], dtype=np.float64)
        metadata = dict(doc.get("metadata", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointCorruptError(f"{path}: malformed field ({exc})") from exc
    if params.ndim != 1 or params.size != parameter_count(dims):
        raise CheckpointDimensionError(
            f"{path}: {params.size} parameters do not match layer dims {dims}")
    try:
        net = SineMlp.from_flat(dims, omega0, params)
    except ConfigurationError as exc:
        raise CheckpointDimensionError(f"{path}: {exc}") from exc
    return net, metadata


def load_checkpoint(path) -> SineMlp:
    return read_checkpoint(path)[0]
