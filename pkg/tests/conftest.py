import numpy as np
import pytest

from gmmstream import ClusterSignature, SketchState

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, d, scale=1.0):
    a = rng.normal(size=(d, d))
    return scale * (a @ a.T + d * np.eye(d))


def make_sketch(signatures, epsilon_scale=1e-6, chunks_processed=1):
    """Sketch holding the given signatures with ids as given."""
    return SketchState(
        dimensionality=signatures[0].dimension,
        base_signatures=list(signatures),
        next_cluster_id=max(s.id for s in signatures) + 1,
        chunks_processed=chunks_processed,
        config_snapshot={"em": {"epsilon_scale": epsilon_scale}},
    )


def sig(id, mean, cov, n, chunk=0):
    return ClusterSignature(id=id, num_points=n, mean=np.asarray(mean, float),
                            covariance=np.asarray(cov, float), created_at_chunk=chunk)


def random_sketch(rng, n_clusters=None, n_anomalies=None):
    """A structurally valid sketch with random contents."""
    from gmmstream import AnomalyRecord, ClusterSignature

    d = int(rng.integers(1, 6))
    n_clusters = int(rng.integers(1, 15)) if n_clusters is None else n_clusters
    n_anomalies = int(rng.integers(0, 40)) if n_anomalies is None else n_anomalies
    chunks = int(rng.integers(1, 40))
    ids = sorted(rng.choice(1000, size=n_clusters, replace=False).tolist())
    sigs = []
    for cid in ids:
        created = int(rng.integers(0, chunks))
        later = sorted(set(rng.integers(created, chunks, size=3).tolist()) - {created})
        log = [(created, int(rng.integers(1, 50)))] + [(c, int(rng.integers(1, 50))) for c in later]
        sigs.append(ClusterSignature(
            id=cid,
            num_points=sum(n for _, n in log),
            mean=rng.normal(scale=10.0 ** rng.integers(-3, 7), size=d),
            covariance=random_spd(rng, d, scale=float(rng.uniform(1e-6, 1e6))),
            created_at_chunk=created,
            growth_log=log,
        ))
    anomalies = []
    for aid in range(n_anomalies):
        first = int(rng.integers(0, chunks))
        anomalies.append(AnomalyRecord(
            id=aid,
            point=rng.normal(scale=1e4, size=d),
            first_seen_chunk=first,
            nearest_cluster_id=int(rng.choice(ids)),
            detection_cluster_id=int(rng.choice(ids)),
            detection_score=float(rng.uniform(3, 50)),
            temporal_scores=[(c, float(rng.uniform(0, 50)), int(rng.choice(ids))) for c in range(first, chunks)],
            compression_scores=[(k, float(rng.exponential(5)), int(rng.choice(ids)))
                                for k in range(n_clusters - 1, 0, -1)][: int(rng.integers(0, 4))],
        ))
    return SketchState(
        dimensionality=d,
        base_signatures=sigs,
        anomalies=anomalies,
        next_cluster_id=ids[-1] + 1 + int(rng.integers(0, 5)),
        next_anomaly_id=n_anomalies,
        chunks_processed=chunks,
        config_snapshot={"em": {"epsilon_scale": float(rng.uniform(1e-8, 1e-4))}, "seed": int(rng.integers(1e9))},
    )


def assert_sketches_equal(a, b):
    """Structural equality with bit-identical numerics."""
    assert a.dimensionality == b.dimensionality
    assert (a.next_cluster_id, a.next_anomaly_id, a.chunks_processed) == \
        (b.next_cluster_id, b.next_anomaly_id, b.chunks_processed)
    assert a.config_snapshot == b.config_snapshot
    assert len(a.base_signatures) == len(b.base_signatures)
    for x, y in zip(a.base_signatures, b.base_signatures):
        assert (x.id, x.num_points, x.created_at_chunk) == (y.id, y.num_points, y.created_at_chunk)
        assert list(x.growth_log) == list(y.growth_log)
        assert np.array_equal(x.mean, y.mean) and np.array_equal(x.covariance, y.covariance)
    assert len(a.anomalies) == len(b.anomalies)
    for x, y in zip(a.anomalies, b.anomalies):
        assert (x.id, x.first_seen_chunk, x.nearest_cluster_id, x.detection_cluster_id) == \
            (y.id, y.first_seen_chunk, y.nearest_cluster_id, y.detection_cluster_id)
        assert x.detection_score == y.detection_score
        assert np.array_equal(x.point, y.point)
        assert list(x.temporal_scores) == list(y.temporal_scores)
        assert list(x.compression_scores) == list(y.compression_scores)


def ten_cluster_sketch():
    """Seven separated groups; three of them split into two overlapping halves."""
    sigs = []
    centers = [(0, 0), (60, 0), (0, 60), (60, 60), (120, 0), (120, 60), (60, 120)]
    for g, (cx, cy) in enumerate(centers):
        if g < 3:
            # halves of one group, offset along a different axis each time
            off = np.array([[1.0, 0.0], [0.0, 1.0], [0.7, 0.7]][g])
            sigs.append(sig(len(sigs), np.array([cx, cy]) - 0.5 * off, np.eye(2), 400 + 50 * g))
            sigs.append(sig(len(sigs), np.array([cx, cy]) + 0.5 * off, np.eye(2), 300))
        else:
            sigs.append(sig(len(sigs), [cx, cy], np.diag([2.0, 1.0]), 500))
    return make_sketch(sigs, chunks_processed=5)
