import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import rand_score

from gmmstream import (
    ConfigError,
    Dataset,
    DimensionError,
    MixtureSpec,
    ParseError,
    StateError,
    StreamSpec,
    augment,
    batch_baseline,
    generate_synthetic,
    label_by_sketch,
    load_dataset,
    make_stream,
    rand_index,
)
from gmmstream.harness import s1_like, unbalance_like
from gmmstream.sketch import SketchState

from conftest import make_sketch, sig


def brute_rand(a, b):
    agree = total = 0
    for i, j in itertools.combinations(range(len(a)), 2):
        agree += (a[i] == a[j]) == (b[i] == b[j])
        total += 1
    return agree / total


def test_load_whitespace_and_comma(tmp_path):
    p = tmp_path / "d.txt"
    p.write_text("# header\n1 2\n\n3,4\n  5\t6  \n")
    ds = load_dataset(p)
    np.testing.assert_array_equal(ds.points, [[1, 2], [3, 4], [5, 6]])
    assert ds.name == "d"


def test_load_single_row(tmp_path):
    p = tmp_path / "one.txt"
    p.write_text("1.0 2.0\n")
    np.testing.assert_array_equal(load_dataset(p).points, [[1.0, 2.0]])


@pytest.mark.parametrize("content,line", [("1 2\n3\n", 2), ("1 2\nx y\n", 2), ("1 nan\n", 1)])
def test_load_errors_report_line(tmp_path, content, line):
    p = tmp_path / "bad.txt"
    p.write_text(content)
    with pytest.raises(ParseError, match=f"line {line}"):
        load_dataset(p)


def test_load_empty(tmp_path):
    p = tmp_path / "empty.txt"
    p.write_text("# nothing\n\n")
    with pytest.raises(ParseError):
        load_dataset(p)


@pytest.mark.parametrize("n,copies,expected", [(6500, 2, 19500), (5000, 2, 15000), (10, 0, 10)])
def test_augment_sizes(n, copies, expected):
    ds = Dataset(np.arange(2 * n, dtype=float).reshape(n, 2), labels=np.arange(n))
    out = augment(ds, copies)
    assert len(out) == expected and len(out.labels) == expected
    np.testing.assert_array_equal(out.points[:n], ds.points)


def test_make_stream_chunks():
    ds = Dataset(np.arange(30000, dtype=float).reshape(15000, 2))
    chunks = make_stream(ds, StreamSpec(chunk_size=500, rng_seed=3))
    assert len(chunks) == 30
    assert [c.chunk_index for c in chunks] == list(range(30))
    allpts = np.vstack([c.points for c in chunks])
    assert sorted(allpts[:, 0]) == sorted(ds.points[:, 0])
    again = make_stream(ds, StreamSpec(chunk_size=500, rng_seed=3))
    assert all(np.array_equal(a.points, b.points) for a, b in zip(chunks, again))


def test_make_stream_one_chunk_and_short_tail():
    ds = Dataset(np.arange(14, dtype=float).reshape(7, 2))
    one = make_stream(ds, StreamSpec(chunk_size=7))
    assert len(one) == 1 and sorted(one[0].points[:, 0]) == sorted(ds.points[:, 0])
    assert [len(c) for c in make_stream(ds, StreamSpec(chunk_size=3))] == [3, 3, 1]


def test_stream_spec_validation():
    with pytest.raises(ConfigError):
        StreamSpec(chunk_size=0)
    with pytest.raises(ConfigError):
        StreamSpec(augmentation_copies=-1)


def test_synthetic_single_component():
    spec = MixtureSpec([1.0], [[5.0, -2.0]], [np.diag([4.0, 9.0])])
    ds = generate_synthetic(spec, n=1000, seed=0)
    sd = np.array([2.0, 3.0])
    assert np.all(np.abs(ds.points.mean(axis=0) - [5.0, -2.0]) < 4 * sd / np.sqrt(1000))


def test_synthetic_weights():
    spec = MixtureSpec([0.5, 0.5], [[0.0], [10.0]], [[[1.0]], [[1.0]]])
    ds = generate_synthetic(spec, n=10000, seed=1)
    assert abs(np.sum(ds.labels == 0) - 5000) < 3 * np.sqrt(10000 * 0.25)


def test_synthetic_ten_components_baseline_recovers():
    rng = np.random.default_rng(2)
    means = np.array([[x, y] for x in range(0, 100, 20) for y in (0, 40)], dtype=float)
    spec = MixtureSpec(np.full(10, 0.1), means, np.tile(np.eye(2), (10, 1, 1)))
    ds = generate_synthetic(spec, n=3000, seed=int(rng.integers(1000)))
    assert rand_index(batch_baseline(ds, 10, seed=0), ds.labels) > 0.95


def test_mixture_validation(tmp_path):
    with pytest.raises(ConfigError):
        MixtureSpec([0.7, 0.7], [[0.0], [1.0]], [[[1.0]], [[1.0]]])
    with pytest.raises(ConfigError):
        MixtureSpec([1.0], [[0.0, 0.0]], [[[1.0, 2.0], [2.0, 1.0]]])
    p = tmp_path / "m.json"
    p.write_text('{"weights": [1.0], "means": [[1, 2]], "covariances": [[[1, 0], [0, 1]]], "n": 5, "seed": 3}')
    spec = MixtureSpec.from_file(p)
    assert len(generate_synthetic(spec)) == 5
    p.write_text('{"weights": [1.0]}')
    with pytest.raises(ConfigError):
        MixtureSpec.from_file(p)


def test_batch_baseline_k1():
    pts = np.random.default_rng(0).normal(size=(50, 2))
    assert len(set(batch_baseline(pts, 1, seed=0))) == 1


def test_label_by_sketch_examples():
    sk = make_sketch([sig(0, [0, 0], np.eye(2), 10), sig(1, [10, 0], np.eye(2), 10)])
    np.testing.assert_array_equal(label_by_sketch(np.array([[4.0, 0.0], [10.0, 0.0], [0.0, 0.0]]), sk), [0, 1, 0])
    one = make_sketch([sig(7, [0, 0], np.eye(2), 10)])
    assert set(label_by_sketch(np.random.default_rng(0).normal(size=(20, 2)), one)) == {7}
    with pytest.raises(StateError):
        label_by_sketch(np.zeros((1, 2)), SketchState(dimensionality=2))


def test_rand_index_examples():
    assert rand_index([0, 0, 1, 1], [0, 1, 1, 1]) == 0.5
    assert rand_index([3, 3, 1], [0, 0, 2]) == 1.0
    with pytest.raises(DimensionError):
        rand_index([0, 1], [0])
    with pytest.raises(DimensionError):
        rand_index([0], [0])


@settings(max_examples=150, deadline=None)
@given(st.integers(2, 60).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 6), min_size=n, max_size=n),
    st.lists(st.integers(-3, 3), min_size=n, max_size=n))))
def test_rand_index_oracles(pair):
    a, b = pair
    ri = rand_index(a, b)
    assert ri == brute_rand(a, b)
    assert ri == pytest.approx(rand_score(a, b), abs=1e-12)
    assert ri == rand_index(b, a)


def test_stand_ins():
    s1 = s1_like(0)
    assert s1.points.shape == (5000, 2) and len(set(s1.labels)) == 15
    unb = unbalance_like(0)
    assert unb.points.shape == (6500, 2)
    assert sorted(np.bincount(unb.labels)) == [100] * 5 + [2000] * 3
