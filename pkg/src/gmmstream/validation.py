"""Stream-vs-batch agreement over several seeds."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .config import RunConfig
from .estimator import StreamingGaussianClusterer
from .exceptions import ConfigError
from .harness import augment, batch_baseline, label_by_sketch, make_stream, rand_index


@dataclass(frozen=True)
class ValidationRow:
    """Outcome of one seeded run."""

    dataset: str
    seed: int
    rand_index: float
    rand_index_truth: float | None
    base_clusters: int
    final_clusters: int
    anomalies: int
    runtime_s: float

    def as_row(self):
        return asdict(self)


def run_seed(ds, config, seed, target_k, baseline_k=None):
    """Stream one seeded permutation of ``ds``, compress and compare to batch EM.

    ``seed`` drives both the arrival order and EM initialization; the batch
    baseline uses the same seed. Points are labelled by their nearest
    compressed base cluster.
    """
    baseline_k = target_k if baseline_k is None else baseline_k
    start = time.perf_counter()
    aug = augment(ds, config.stream.augmentation_copies)
    spec = replace(config.stream, rng_seed=int(seed))
    est = StreamingGaussianClusterer.from_config(config, random_state=int(seed))
    est.fit_stream(make_stream(aug, spec))
    compressed, _ = est.compress(target_k)
    labels = label_by_sketch(aug, compressed)
    reference = batch_baseline(aug, baseline_k, int(seed), config.em)
    truth = None if aug.labels is None else rand_index(labels, aug.labels)
    return ValidationRow(
        dataset=ds.name,
        seed=int(seed),
        rand_index=rand_index(labels, reference),
        rand_index_truth=truth,
        base_clusters=len(est.sketch_),
        final_clusters=len(compressed),
        anomalies=len(est.sketch_.anomalies),
        runtime_s=time.perf_counter() - start,
    )


def run_validation(ds, config=None, seeds=5, target_k=15, baseline_k=None, workers=1):
    """Run :func:`run_seed` for seeds ``0..seeds-1`` (or the given seeds).

    Each worker thread owns its own estimator and sketch.

    Returns
    -------
    rows : list of ValidationRow
        In seed order.
    median : float
        Median Rand index against the batch baseline.
    """
    config = config or RunConfig()
    seed_list = list(range(seeds)) if isinstance(seeds, (int, np.integer)) else [int(s) for s in seeds]
    if not seed_list:
        raise ConfigError("at least one seed is required")
    if int(workers) < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    if int(workers) == 1:
        rows = [run_seed(ds, config, s, target_k, baseline_k) for s in seed_list]
    else:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            rows = list(pool.map(lambda s: run_seed(ds, config, s, target_k, baseline_k), seed_list))
    return rows, float(np.median([r.rand_index for r in rows]))
