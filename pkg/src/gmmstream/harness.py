"""Datasets, stream simulation and clustering validation."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .chunk import DataChunk, EmConfig, fit_chunk
from .anomaly import nearest_scores
from .exceptions import ConfigError, DimensionError, InvalidData, ParseError, StateError


@dataclass
class Dataset:
    """A finite point set, optionally with ground-truth labels."""

    points: np.ndarray
    name: str = ""
    source_path: str = ""
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        if self.points.size and not np.all(np.isfinite(self.points)):
            raise InvalidData(f"dataset {self.name!r} contains non-finite coordinates")
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if self.labels.shape[0] != self.points.shape[0]:
                raise DimensionError("labels and points differ in length")

    def __len__(self):
        return self.points.shape[0]

    @property
    def dimension(self):
        return self.points.shape[1]


@dataclass
class StreamSpec:
    """How a dataset is replayed as a stream."""

    chunk_size: int = 500
    rng_seed: int = 0
    augmentation_copies: int = 2

    def __post_init__(self):
        if int(self.chunk_size) < 1:
            raise ConfigError(f"chunk_size must be >= 1, got {self.chunk_size}")
        if int(self.augmentation_copies) < 0:
            raise ConfigError(f"augmentation_copies must be >= 0, got {self.augmentation_copies}")
        self.chunk_size = int(self.chunk_size)
        self.rng_seed = int(self.rng_seed)
        self.augmentation_copies = int(self.augmentation_copies)


def load_dataset(path, name=None):
    """Read whitespace- or comma-delimited numeric rows.

    Blank lines and lines starting with ``#`` are skipped.

    Raises
    ------
    ParseError
        On ragged rows, non-numeric fields or an empty file.
    """
    rows = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            fields = text.replace(",", " ").split()
            try:
                values = [float(f) for f in fields]
            except ValueError:
                raise ParseError(f"non-numeric field in {text!r}", line=lineno) from None
            if not all(np.isfinite(values)):
                raise ParseError("non-finite value", line=lineno)
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ParseError(f"expected {width} columns, found {len(values)}", line=lineno)
            rows.append(values)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return Dataset(
        points=np.array(rows, dtype=np.float64),
        name=name or os.path.splitext(os.path.basename(path))[0],
        source_path=str(path),
    )


def augment(ds, copies):
    """Append ``copies`` extra copies of the dataset to itself."""
    reps = int(copies) + 1
    return Dataset(
        points=np.tile(ds.points, (reps, 1)),
        name=ds.name,
        source_path=ds.source_path,
        labels=None if ds.labels is None else np.tile(ds.labels, reps),
    )


def stream_order(n, seed):
    """The permutation used by :func:`make_stream`."""
    return np.random.default_rng(seed).permutation(n)


def make_stream(ds, spec):
    """Cut a seeded random permutation of ``ds`` into consecutive chunks.

    Every point appears in exactly one chunk; the last chunk may be short.

    Returns
    -------
    list of DataChunk
    """
    order = stream_order(len(ds), spec.rng_seed)
    return [
        DataChunk(ds.points[order[start:start + spec.chunk_size]], chunk_index=i)
        for i, start in enumerate(range(0, len(ds), spec.chunk_size))
    ]


@dataclass
class MixtureSpec:
    """Weights, means and covariances of a Gaussian mixture."""

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    name: str = "synthetic"
    n: int | None = None
    seed: int | None = None

    def __post_init__(self):
        try:
            self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
            self.means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
            self.covariances = np.asarray(self.covariances, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed mixture: {exc}") from None
        k, d = self.means.shape
        if self.weights.shape != (k,):
            raise ConfigError(f"{self.weights.shape[0]} weights for {k} components")
        if np.any(self.weights < 0) or not np.isclose(self.weights.sum(), 1.0):
            raise ConfigError("mixture weights must be non-negative and sum to 1")
        if self.covariances.shape != (k, d, d):
            raise ConfigError(f"covariances must have shape {(k, d, d)}, got {self.covariances.shape}")
        for j, cov in enumerate(self.covariances):
            if not np.allclose(cov, cov.T) or np.linalg.eigvalsh(cov).min() <= 0:
                raise ConfigError(f"covariance {j} is not symmetric positive definite")

    @classmethod
    def from_file(cls, path):
        """Load a mixture from JSON with keys weights, means, covariances [, n, seed, name]."""
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from None
        missing = {"weights", "means", "covariances"} - set(data)
        if missing:
            raise ConfigError(f"{path}: missing keys {sorted(missing)}")
        return cls(**{k: data[k] for k in ("weights", "means", "covariances", "name", "n", "seed") if k in data})


def generate_synthetic(spec, n=None, seed=None):
    """Draw ``n`` labelled points from a Gaussian mixture.

    Returns
    -------
    Dataset
        With ``labels`` set to the generating component of each point.
    """
    n = spec.n if n is None else n
    seed = spec.seed if seed is None else seed
    if n is None or int(n) < 1:
        raise ConfigError(f"n must be a positive integer, got {n}")
    rng = np.random.default_rng(seed)
    labels = rng.choice(len(spec.weights), size=int(n), p=spec.weights)
    points = np.empty((int(n), spec.means.shape[1]))
    for j in range(len(spec.weights)):
        idx = np.flatnonzero(labels == j)
        if idx.size:
            points[idx] = rng.multivariate_normal(spec.means[j], spec.covariances[j], size=idx.size)
    return Dataset(points=points, name=spec.name, labels=labels)


def batch_baseline(ds, k, seed, config=None):
    """Hard labels from EM on the whole dataset at once."""
    points = ds.points if isinstance(ds, Dataset) else ds
    result = fit_chunk(points, k, config or EmConfig(), np.random.default_rng(seed))
    return result.assignments


def label_by_sketch(ds, sketch):
    """Label each point with the id of its nearest base cluster (Mahalanobis)."""
    if not sketch.base_signatures:
        raise StateError("sketch has no base clusters")
    points = ds.points if isinstance(ds, Dataset) else np.atleast_2d(np.asarray(ds, dtype=np.float64))
    _, ids = nearest_scores(points, sketch.base_signatures, sketch.epsilon_scale)
    return ids


def _pairs(x):
    return x * (x - 1) // 2


def rand_index(labels_a, labels_b):
    """Fraction of point pairs on which two labelings agree.

    A pair agrees when both labelings put it in one cluster or both split it.
    Computed from the contingency table, in ``O(n + cells)``.
    """
    a = np.asarray(labels_a).reshape(-1)
    b = np.asarray(labels_b).reshape(-1)
    if a.shape != b.shape:
        raise DimensionError(f"label vectors differ in length: {a.shape[0]} vs {b.shape[0]}")
    n = a.shape[0]
    if n < 2:
        raise DimensionError("rand_index needs at least two points")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    nb = int(ib.max()) + 1
    cells = np.bincount(ia.astype(np.int64) * nb + ib, minlength=(int(ia.max()) + 1) * nb)
    rows = np.bincount(ia)
    cols = np.bincount(ib)
    total = _pairs(n)
    same_both = int(_pairs(cells.astype(np.int64)).sum())
    same_a = int(_pairs(rows.astype(np.int64)).sum())
    same_b = int(_pairs(cols.astype(np.int64)).sum())
    agree = total - same_a - same_b + 2 * same_both
    return agree / total


# Stand-ins shaped after the public S1 and unbalance benchmark sets, for use
# when the real files are unavailable. They are not those datasets.

def s1_like(seed=0, n=5000):
    """15 well-separated 2-D Gaussian blobs on a 10^6 scale, about n/15 points each."""
    rng = np.random.default_rng(seed)
    centers = []
    while len(centers) < 15:
        c = rng.uniform(1e5, 9e5, size=2)
        if all(np.linalg.norm(c - o) > 1.6e5 for o in centers):
            centers.append(c)
    covs = []
    for _ in range(15):
        sd = rng.uniform(1.8e4, 3.2e4, size=2)
        theta = rng.uniform(0, np.pi)
        rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        covs.append(rot @ np.diag(sd ** 2) @ rot.T)
    spec = MixtureSpec(np.full(15, 1 / 15), np.array(centers), np.array(covs), name="s1_like")
    return generate_synthetic(spec, n=n, seed=seed + 1)


def unbalance_like(seed=0):
    """Three dense 2000-point blobs and five sparse 100-point blobs (6500 points)."""
    rng = np.random.default_rng(seed)
    dense = [(1.5e5, 2.0e5), (1.5e5, 4.0e5), (2.7e5, 3.0e5)]
    sparse = [(5.5e5, 2.0e5), (5.5e5, 4.0e5), (6.8e5, 3.0e5), (7.9e5, 1.9e5), (7.9e5, 4.1e5)]
    points, labels = [], []
    for j, (c, count, sd) in enumerate(
        [(c, 2000, 1.0e4) for c in dense] + [(c, 100, 1.5e4) for c in sparse]
    ):
        points.append(rng.normal(c, sd, size=(count, 2)))
        labels.append(np.full(count, j))
    return Dataset(points=np.vstack(points), name="unbalance_like", labels=np.concatenate(labels))
