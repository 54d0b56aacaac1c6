import io

import numpy as np
import pytest

from neuralsdf import evaluation as E
from neuralsdf.implicit_geom import Sphere, Torus
from neuralsdf.net import init_siren
from neuralsdf.sampler import BatchSpec
from neuralsdf.shapes import bumpy_sphere
from neuralsdf.train import TrainConfig, dataset_from_mesh


class Shifted:
    def __init__(self, surface, delta):
        self.surface, self.delta = surface, delta

    def probe(self, p, order=1):
        v, g, h = self.surface.probe(p, order)
        return v + self.delta, g, h


def test_exact_candidate_scores_zero():
    t = Torus(0.6, 0.25)
    rep = E.table1_metrics(t, t, n_surface=500, repetitions=3)
    assert rep.domain_max == 0 and rep.surface_max < 1e-15 and rep.align_max < 1e-15


def test_constant_offset():
    s = Sphere(0.6)
    rep = E.table1_metrics(Shifted(s, 0.01), s, n_surface=500, repetitions=3)
    for v in (rep.domain_mean, rep.domain_max, rep.surface_mean, rep.surface_max):
        assert v == pytest.approx(0.01, abs=1e-12)
    assert rep.align_mean < 1e-15


def test_flipped_normals_score_two():
    s = Sphere(0.6)

    class Flip:
        def probe(self, p, order=1):
            v, g, h = s.probe(p, order)
            return v, None if g is None else -g, h
    assert E.table1_metrics(Flip(), s, n_surface=200, repetitions=2).align_mean == pytest.approx(2.0)


def test_stderr_is_consistent():
    s = Sphere(0.6)
    net = init_siren([3, 16, 1], 3.0, 0)
    a = E.table1_metrics(net, s, n_surface=1000, repetitions=5, seed=1)
    b = E.table1_metrics(net, s, n_surface=1000, repetitions=5, seed=2)
    for key, ma, mb in (("domain", a.domain_mean, b.domain_mean),
                        ("surface", a.surface_mean, b.surface_mean)):
        se = np.hypot(a.stderr[key], b.stderr[key])
        assert 0 < se and abs(ma - mb) < 5 * se
    # more samples, smaller error bars
    c = E.table1_metrics(net, s, n_surface=4000, repetitions=5, seed=1)
    assert c.stderr["domain"] < a.stderr["domain"]


def test_metrics_are_deterministic():
    s = Sphere(0.6)
    net = init_siren([3, 16, 1], 3.0, 0)
    assert E.table1_metrics(net, s, 300, 2, seed=4) == E.table1_metrics(net, s, 300, 2, seed=4)


def test_domain_points_avoid_shell():
    s = Sphere(0.6)
    p = E._domain_points(s, 2000, (-1, 1), 0.05, np.random.default_rng(0))
    assert len(p) == 2000 and np.all(np.abs(s.sdf(p)) > 0.05)


def test_mesh_reference():
    data = dataset_from_mesh(bumpy_sphere(2))
    ref = E.MeshReference(data)
    geo = ref.sample(100, np.random.default_rng(0))
    assert np.allclose(ref.signed_distance(geo.points), 0)
    assert len(ref.sample(10 * len(data.geometry), np.random.default_rng(0))) == 10 * len(data.geometry)


def test_metrics_csv():
    buf = io.StringIO()
    rep = E.table1_metrics(Sphere(0.6), Sphere(0.6), 100, 1)
    E.write_metrics_csv([rep.row("ours", "sphere")], buf)
    head, row = buf.getvalue().splitlines()
    assert head == ",".join(E.COLUMNS) and row.startswith("ours,sphere,0.0,")


@pytest.fixture(scope="module")
def ab_data():
    return dataset_from_mesh(bumpy_sphere(2))


def ab_configs(**kw):
    base = dict(layer_dims=[3, 16, 16, 1], epochs=1, **kw)
    return (TrainConfig(batch=BatchSpec(m=100), **base),
            TrainConfig(batch=BatchSpec(m=100, fractions=(0.1, 0.7, 0.2)), **base))


def test_ab_zero_budget_is_a_tie(ab_data):
    uniform, biased = ab_configs()
    rep = E.sampling_ab_test(ab_data, uniform, biased, seeds=[0, 1, 2], budget=0)
    assert rep.checkpoints == [0]
    assert np.array_equal(rep.uniform, rep.biased)
    assert np.all(rep.median_difference() == 0) and rep.sign_test(0) == 1.0


def test_ab_small_budget(ab_data):
    uniform, biased = ab_configs()
    rep = E.sampling_ab_test(ab_data, uniform, biased, seeds=[0, 1], budget=4)
    assert rep.checkpoints == [2, 4] and rep.uniform.shape == (2, 2)
    rows = list(rep.rows())
    assert [r[0] for r in rows] == [2, 4]


def test_ab_rejects_unpaired_configs(ab_data):
    uniform, _ = ab_configs()
    _, biased = ab_configs(learning_rate=1e-3)
    with pytest.raises(ValueError):
        E.sampling_ab_test(ab_data, uniform, biased, seeds=[0], budget=2)
    with pytest.raises(ValueError):
        E.sampling_ab_test(ab_data, uniform, uniform, seeds=[0], budget=2, checkpoints=[3])


def test_sign_test_values():
    rep = E.ABReport([1], np.zeros((6, 1)), np.ones((6, 1)), list(range(6)))
    assert rep.sign_test(0) == pytest.approx(2 / 64)
    # five seeds can never reach the 5% level
    rep5 = E.ABReport([1], np.zeros((5, 1)), np.ones((5, 1)), list(range(5)))
    assert rep5.sign_test(0) == pytest.approx(0.0625)
