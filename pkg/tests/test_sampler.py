import numpy as np
import pytest
from hypothesis import given, strategies as st

from neuralsdf import sampler as S
from neuralsdf.implicit_geom import Torus
from neuralsdf.oracle import SdfOracle


@pytest.fixture(scope="module")
def torus_data():
    t = Torus(0.6, 0.25)
    geo = t.sample(1000, np.random.default_rng(0))
    return geo, SdfOracle(geo.points, geo.normals)


@given(total=st.integers(0, 10_000),
       raw=st.lists(st.floats(0.0, 1.0), min_size=1, max_size=5).filter(lambda r: sum(r) > 0))
def test_largest_remainder(total, raw):
    f = np.asarray(raw) / sum(raw)
    counts = S.largest_remainder(total, f)
    assert counts.sum() == total
    assert np.all(np.abs(counts - f * total) < 1.0)


def test_largest_remainder_examples():
    assert S.largest_remainder(10, (0.5, 0.4, 0.1)).tolist() == [5, 4, 1]
    assert S.largest_remainder(7, (1 / 3, 1 / 3, 1 / 3)).tolist() == [3, 2, 2]
    with pytest.raises(S.SamplingError):
        S.largest_remainder(5, (0.5, 0.6))


def test_partition_is_sorted_and_stable():
    feature = np.array([3.0, 1.0, 1.0, 0.0, 5.0, 2.0])
    p = S.partition_by_curvature(feature, 2, 3, 1)
    v1, v2, v3 = p.classes()
    assert v1.tolist() == [3, 1] and v2.tolist() == [2, 5, 0] and v3.tolist() == [4]
    assert p.thresholds() == (1.0, 5.0)
    assert p.uniform_fractions() == (2 / 6, 3 / 6, 1 / 6)
    with pytest.raises(S.SamplingError):
        S.partition_by_curvature(feature, 0, 5, 1)


def test_epoch_plan():
    assert S.epoch_plan(20000, 2500) == 8 and S.epoch_plan(20001, 2500) == 9
    assert S.epoch_plan(3, 10) == 1
    with pytest.raises(S.SamplingError):
        S.epoch_plan(0, 1)


def test_batch_counts_follow_fractions(torus_data):
    geo, oracle = torus_data
    part = S.partition_by_fractions(geo)
    spec = S.BatchSpec(m=100, fractions=(0.1, 0.7, 0.2), m_off=40, seed=5)
    batch = S.sample_minibatch(part, spec, geo, oracle)
    classes = part.classes()
    got = [np.isin(batch.index, c).sum() for c in classes]
    assert got == [10, 70, 20] and batch.m_off == 40
    assert not batch.with_replacement
    assert np.array_equal(batch.off_sdf, oracle.signed_distance(batch.off_points))
    assert np.all(np.abs(batch.off_points) <= 1)


def test_sampler_is_deterministic(torus_data):
    geo, oracle = torus_data
    spec = S.BatchSpec(m=64, seed=11)
    a, b = S.CurvatureSampler(geo, spec, oracle), S.CurvatureSampler(geo, spec, oracle)
    for _ in range(3):
        x, y = a.sample(), b.sample()
        assert np.array_equal(x.index, y.index) and np.array_equal(x.off_points, y.off_points)
    other = S.sample_minibatch(None, S.BatchSpec(m=64, seed=12), geo, oracle)
    assert not np.array_equal(other.index, S.sample_minibatch(None, spec, geo, oracle).index)


def test_pass_visits_every_vertex_once(torus_data):
    geo, oracle = torus_data
    sampler = S.CurvatureSampler(geo, S.BatchSpec(m=250, m_off=0), oracle)
    seen = np.concatenate([sampler.sample().index for _ in range(4)])
    assert np.array_equal(np.sort(seen), np.arange(1000))


def test_replacement_flag(torus_data):
    geo, oracle = torus_data
    part = S.partition_by_curvature(geo.feature, 990, 5, 5)
    spec = S.BatchSpec(m=100, fractions=(0.5, 0.4, 0.1), seed=0)
    batch = S.sample_minibatch(part, spec, geo, oracle)
    assert batch.with_replacement and batch.m == 100


def test_biased_needs_partition(torus_data):
    geo, oracle = torus_data
    with pytest.raises(S.SamplingError):
        S.CurvatureSampler(geo, S.BatchSpec(m=10, fractions=(0.5, 0.4, 0.1)), oracle)
    with pytest.raises(S.SamplingError):
        S.BatchSpec(m=0)
    with pytest.raises(S.SamplingError):
        S.BatchSpec(m=10, fractions=(0.5, 0.6, 0.1))


def test_partition_csv(torus_data):
    import io
    geo, _ = torus_data
    buf = io.StringIO()
    S.write_partition_csv(S.partition_by_fractions(geo), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "class,size,feature_min,feature_max"
    assert [l.split(",")[1] for l in lines[1:]] == ["500", "400", "100"]
