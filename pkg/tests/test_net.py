import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import central_gradient, central_hessian, rel_err
from neuralsdf import net as N


def reference_forward(net, p):
    """Straight-line per-layer evaluation, one point at a time."""
    x = np.asarray(p, dtype=float)
    for i, (w, b) in enumerate(zip(net.weights[:-1], net.biases[:-1])):
        z = w @ x + b
        x = np.sin(net.omega0 * z if i == 0 else z)
    return float((net.weights[-1] @ x + net.biases[-1])[0])


def small_net(seed, dims=(3, 16, 16, 1), omega0=3.0):
    return N.init_siren(list(dims), omega0, seed)


net_dims = st.lists(st.integers(1, 16), min_size=0, max_size=2).map(lambda h: [3, *h, 1])


def test_init_is_deterministic():
    a = N.init_siren([3, 8, 1], 30.0, 7)
    b = N.init_siren([3, 8, 1], 30.0, 7)
    assert np.array_equal(a.flat_parameters(), b.flat_parameters())


def test_init_bounds():
    net = N.init_siren([3, 80, 80, 1], 30.0, 0)
    assert np.all(np.abs(net.weights[0]) <= 1 / 3)
    bound = np.sqrt(6 / 80) / 30
    for w in net.weights[1:]:
        assert np.all(np.abs(w) <= bound)


def test_degenerate_depth_is_affine():
    net = N.init_siren([3, 1], 30.0, 0)
    p = np.array([[0.1, 0.2, 0.3], [0.5, -0.1, 0.0]])
    expect = p @ net.weights[0].T[:, 0] + net.biases[0][0]
    assert np.allclose(N.forward(net, p), expect, atol=1e-15)


@pytest.mark.parametrize("dims", [[3, 4, 2], [2, 4, 1], [3, 4, 5, 1]])
def test_bad_dims(dims):
    with pytest.raises(N.ConfigurationError):
        if dims == [3, 4, 5, 1]:
            N.SineMlp([np.zeros((4, 3)), np.zeros((5, 3)), np.zeros((1, 5))],
                      [np.zeros(4), np.zeros(5), np.zeros(1)])
        else:
            N.init_siren(dims, 30.0, 0)


def test_constant_network():
    net = N.SineMlp([np.zeros((4, 3)), np.zeros((1, 4))], [np.zeros(4), np.array([2.5])])
    assert np.all(N.forward(net, np.random.default_rng(0).normal(size=(10, 3))) == 2.5)


def test_hand_sine():
    net = N.SineMlp([np.array([[1.0, 0, 0]]), np.array([[1.0]])], [np.zeros(1), np.zeros(1)], 1.0)
    assert N.forward(net, np.array([np.pi / 2, 0, 0])) == pytest.approx(1.0, abs=1e-15)


def test_matches_reference_forward(rng):
    net = small_net(3, (3, 12, 9, 1), 30.0)
    pts = rng.uniform(-1, 1, (20, 3))
    batch = N.forward(net, pts)
    for p, v in zip(pts, batch):
        assert abs(v - reference_forward(net, p)) < 1e-14 * max(1.0, abs(v))


def test_single_point_shapes():
    net = small_net(0)
    v, g, h = N.probe(net, np.zeros(3), 2)
    assert np.ndim(v) == 0 and g.shape == (3,) and h.shape == (3, 3)


@given(seed=st.integers(0, 10_000), dims=net_dims)
def test_gradient_matches_fd(seed, dims):
    net = N.init_siren(dims, 3.0, seed)
    p = np.random.default_rng(seed).uniform(-1, 1, 3)
    g = N.input_gradient(net, p)
    fd = central_gradient(lambda q: N.forward(net, q), p, 1e-5)
    assert rel_err(g, fd) < 1e-6 or np.max(np.abs(g - fd)) < 1e-9


@given(seed=st.integers(0, 10_000), dims=net_dims)
def test_hessian_matches_fd(seed, dims):
    net = N.init_siren(dims, 3.0, seed)
    p = np.random.default_rng(seed).uniform(-1, 1, 3)
    h = N.input_hessian(net, p)
    fd = central_hessian(lambda q: N.input_gradient(net, q), p, 1e-4)
    assert rel_err(h, fd) < 1e-4 or np.max(np.abs(h - fd)) < 1e-8


def test_hessian_exactly_symmetric(rng):
    h = N.input_hessian(small_net(1, omega0=30.0), rng.uniform(-1, 1, (50, 3)))
    assert np.array_equal(h, np.swapaxes(h, 1, 2))


def test_probe_is_pure(rng):
    net = small_net(2)
    p = rng.uniform(-1, 1, (30, 3))
    a = N.probe(net, p, 2)
    b = N.probe(net, p, 2)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


def test_orders_agree(rng):
    net = small_net(5)
    p = rng.uniform(-1, 1, (7, 3))
    v0, _, _ = N.probe(net, p, 0)
    v1, g1, _ = N.probe(net, p, 1)
    v2, g2, _ = N.probe(net, p, 2)
    assert np.allclose(v0, v1, rtol=0, atol=1e-15) and np.allclose(v1, v2, rtol=0, atol=1e-15)
    assert np.allclose(g1, g2, rtol=0, atol=1e-14)


def test_flat_roundtrip():
    net = small_net(4, (3, 5, 7, 1))
    assert net.n_parameters == N.parameter_count([3, 5, 7, 1]) == 5 * 3 + 5 + 7 * 5 + 7 + 7 + 1
    back = N.SineMlp.from_flat(net.layer_dims, net.omega0, net.flat_parameters())
    assert np.array_equal(back.flat_parameters(), net.flat_parameters())
    # layer-major, row-major
    assert net.flat_parameters()[1] == net.weights[0][0, 1]
    assert net.flat_parameters()[15] == net.biases[0][0]


@pytest.mark.parametrize("order", [0, 1, 2])
def test_backward_matches_fd(order, rng):
    net = small_net(6, (3, 6, 5, 1))
    p = rng.uniform(-1, 1, (4, 3))
    dv = rng.normal(size=4)
    dg = rng.normal(size=(4, 3)) if order >= 1 else None
    dh = rng.normal(size=(4, 3, 3)) if order >= 2 else None

    def scalar(theta):
        v, g, h = N.probe(N.SineMlp.from_flat(net.layer_dims, net.omega0, theta), p, order)
        s = np.sum(dv * v)
        if order >= 1:
            s += np.sum(dg * g)
        if order >= 2:
            s += np.sum(0.5 * (dh + dh.transpose(0, 2, 1)) * h)
        return s

    *_, tape = N.probe_with_tape(net, p, order)
    got = N.backward(net, tape, dv, dg, dh).flat()
    theta = net.flat_parameters()
    fd = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = 1e-6
        fd[i] = (scalar(theta + e) - scalar(theta - e)) / 2e-6
    assert rel_err(got, fd) < 1e-6


def test_param_tangent_algebra():
    net = small_net(0, (3, 4, 1))
    t = N.ParamTangent.zeros_like(net)
    assert np.all(t.flat() == 0)
    one = N.ParamTangent([np.ones_like(w) for w in net.weights], [np.ones_like(b) for b in net.biases])
    assert np.all((one + one.scaled(2.0)).flat() == 3.0)


def test_checkpoint_roundtrip(tmp_path):
    net = small_net(8, (3, 80, 80, 1), 30.0)
    path = tmp_path / "m.json"
    N.save_checkpoint(net, path, {"mesh": "bunny", "epoch": 3})
    back, meta = N.read_checkpoint(path)
    assert np.array_equal(back.flat_parameters(), net.flat_parameters())
    assert back.omega0 == net.omega0 and meta == {"mesh": "bunny", "epoch": "3"}
    assert not (tmp_path / "m.json.tmp").exists()


def test_checkpoint_errors(tmp_path):
    net = small_net(0, (3, 4, 1))
    path = tmp_path / "m.json"
    N.save_checkpoint(net, path)
    doc = json.loads(path.read_text())

    (tmp_path / "trunc.json").write_text(path.read_text()[:50])
    with pytest.raises(N.CheckpointCorruptError):
        N.load_checkpoint(tmp_path / "trunc.json")

    (tmp_path / "v.json").write_text(json.dumps({**doc, "format_version": 99}))
    with pytest.raises(N.CheckpointVersionError):
        N.load_checkpoint(tmp_path / "v.json")

    (tmp_path / "d.json").write_text(json.dumps({**doc, "layer_dims": [3, 5, 1]}))
    with pytest.raises(N.CheckpointDimensionError):
        N.load_checkpoint(tmp_path / "d.json")

    with pytest.raises(FileNotFoundError):
        N.load_checkpoint(tmp_path / "missing.json")
