"""Per-chunk Gaussian mixture fitting.

Each chunk is clustered with full-covariance EM. Points are then hard-assigned
to their most responsible component and every surviving component is replaced
by the exact population statistics of its points, so that downstream merges
stay exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ConfigError, DimensionError, InvalidData
from .gaussian import DEFAULT_EPSILON_SCALE, DEFAULT_FLOOR, ClusterSignature, regularize

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class EmConfig:
    """EM stopping rule and covariance ridge."""

    max_iter: int = 100
    tol: float = 1e-6
    epsilon_scale: float = DEFAULT_EPSILON_SCALE
    kmeans_iter: int = 20

    def __post_init__(self):
        if int(self.max_iter) < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")
        if not (np.isfinite(self.tol) and self.tol >= 0):
            raise ConfigError(f"tol must be finite and >= 0, got {self.tol}")
        if not (np.isfinite(self.epsilon_scale) and self.epsilon_scale >= 0):
            raise ConfigError(f"epsilon_scale must be finite and >= 0, got {self.epsilon_scale}")
        if int(self.kmeans_iter) < 0:
            raise ConfigError(f"kmeans_iter must be >= 0, got {self.kmeans_iter}")
        self.kmeans_iter = int(self.kmeans_iter)
        self.max_iter = int(self.max_iter)
        self.tol = float(self.tol)
        self.epsilon_scale = float(self.epsilon_scale)


@dataclass
class DataChunk:
    """Points arriving at one time step."""

    points: np.ndarray
    chunk_index: int = 0

    def __post_init__(self):
        self.points = _check_points(self.points)
        self.chunk_index = int(self.chunk_index)

    def __len__(self):
        return self.points.shape[0]


@dataclass
class ChunkClustering:
    """Result of clustering one chunk.

    ``assignments[i]`` indexes into ``signatures``. Signature ids are local
    (``0 .. len(signatures) - 1``) until the sketch issues global ids.
    """

    signatures: list
    assignments: np.ndarray
    responsibilities_converged: bool
    iterations_used: int
    chunk_index: int = 0
    log_likelihood_trace: list = field(default_factory=list)

    @property
    def dimension(self):
        return self.signatures[0].dimension

    @property
    def num_points(self):
        return int(self.assignments.shape[0])


def _check_points(points):
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if points.ndim != 2 or points.shape[0] == 0 or points.shape[1] == 0:
        raise InvalidData(f"expected a non-empty 2-D array of points, got shape {points.shape}")
    if not np.all(np.isfinite(points)):
        bad = int(np.argwhere(~np.isfinite(points))[0, 0])
        raise InvalidData(f"non-finite coordinate in point {bad}")
    return points


def validate_input(estimator, X, reset):
    """Estimator-side validation: dense finite 2-D floats, consistent width.

    ``reset=True`` records ``n_features_in_``; otherwise the width must match it.
    """
    X = check_array(X, dtype=np.float64)
    if reset:
        estimator.n_features_in_ = X.shape[1]
    elif X.shape[1] != estimator.n_features_in_:
        raise DimensionError(
            f"X has {X.shape[1]} features, but {type(estimator).__name__} "
            f"is expecting {estimator.n_features_in_} features as input."
        )
    return X


def seed_components(points, k, rng):
    """Choose ``k`` initial means by distance-weighted farthest-point sampling.

    The first seed is drawn uniformly; each further seed is drawn with
    probability proportional to its squared distance from the nearest seed
    chosen so far. Once every remaining point coincides with a seed, the rest
    are drawn uniformly from the unchosen points, so ``k == n`` selects every
    point exactly once.

    Parameters
    ----------
    points : ndarray of shape (n, d)
    k : int
        Number of seeds, ``1 <= k <= n``.
    rng : numpy.random.Generator

    Returns
    -------
    ndarray of shape (k, d)
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    chosen = np.zeros(n, dtype=bool)
    first = int(rng.integers(n))
    order = [first]
    chosen[first] = True
    closest = np.sum((points - points[first]) ** 2, axis=1)
    for _ in range(1, k):
        weights = np.where(chosen, 0.0, closest)
        total = weights.sum()
        if total > 0.0:
            idx = int(rng.choice(n, p=weights / total))
        else:
            idx = int(rng.choice(np.flatnonzero(~chosen)))
        order.append(idx)
        chosen[idx] = True
        closest = np.minimum(closest, np.sum((points - points[idx]) ** 2, axis=1))
    return points[order].copy()


def _ridge(points, epsilon_scale):
    d = points.shape[1]
    spread = float(np.trace(np.atleast_2d(np.cov(points.T, bias=True)))) if points.shape[0] > 1 else 0.0
    return max(epsilon_scale * spread / d, DEFAULT_FLOOR)


def _estimate_log_prob(points, weights, means, covariances):
    n, d = points.shape
    k = means.shape[0]
    log_prob = np.empty((n, k))
    for j in range(k):
        factor = linalg.cholesky(covariances[j], lower=True)
        z = linalg.solve_triangular(factor, (points - means[j]).T, lower=True)
        log_det = 2.0 * np.sum(np.log(np.diag(factor)))
        log_prob[:, j] = -0.5 * (d * _LOG_2PI + log_det + np.sum(z * z, axis=0))
    with np.errstate(divide="ignore"):
        log_prob += np.log(weights)
    return log_prob


def kmeans_labels(points, seeds, n_iter):
    """Refine ``seeds`` with up to ``n_iter`` Lloyd iterations; return point labels.

    Seeds that lose all their points keep their previous position.
    """
    centers = seeds.copy()
    labels = None
    for _ in range(max(n_iter, 0) + 1):
        d2 = (np.sum(points ** 2, axis=1)[:, None] - 2.0 * points @ centers.T
              + np.sum(centers ** 2, axis=1)[None, :])
        new = np.argmin(d2, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(centers.shape[0]):
            members = points[labels == j]
            if members.shape[0]:
                centers[j] = members.mean(axis=0)
    return labels


def _m_step(points, resp, ridge):
    d = points.shape[1]
    nk = resp.sum(axis=0) + 10.0 * np.finfo(np.float64).eps
    means = (resp.T @ points) / nk[:, None]
    covariances = np.empty((resp.shape[1], d, d))
    for j in range(resp.shape[1]):
        diff = points - means[j]
        cov = (resp[:, j] * diff.T) @ diff / nk[j]
        cov = 0.5 * (cov + cov.T)
        cov.flat[:: d + 1] += ridge
        covariances[j] = cov
    return nk / nk.sum(), means, covariances


def run_em(points, k, config, rng):
    """Full-covariance EM on ``points``.

    Returns
    -------
    weights, means, covariances, responsibilities, converged, n_iter, ll_trace
        ``ll_trace`` holds the total log-likelihood evaluated at each E-step.
    """
    n, d = points.shape
    ridge = _ridge(points, config.epsilon_scale)
    labels = kmeans_labels(points, seed_components(points, k, rng), config.kmeans_iter)
    resp = np.zeros((n, k))
    resp[np.arange(n), labels] = 1.0
    weights, means, covariances = _m_step(points, resp, ridge)

    trace = []
    converged = False
    resp = None
    n_iter = 0
    for n_iter in range(1, config.max_iter + 1):
        log_prob = _estimate_log_prob(points, weights, means, covariances)
        log_norm = logsumexp(log_prob, axis=1)
        ll = float(np.sum(log_norm))
        resp = np.exp(log_prob - log_norm[:, None])
        if trace and abs(ll - trace[-1]) <= config.tol * abs(trace[-1]):
            trace.append(ll)
            converged = True
            break
        trace.append(ll)

        weights, means, covariances = _m_step(points, resp, ridge)
    return weights, means, covariances, resp, converged, n_iter, trace


def fit_chunk(chunk, k, config=None, rng=None):
    """Cluster one chunk and return exact per-cluster signatures.

    Parameters
    ----------
    chunk : DataChunk or array-like of shape (n, d)
    k : int
        Requested number of components. Reduced to ``n`` if larger.
    config : EmConfig, optional
    rng : numpy.random.Generator or int, optional

    Returns
    -------
    ChunkClustering
        Components left empty by hard assignment are dropped, so there may be
        fewer than ``k`` signatures.
    """
    if not isinstance(chunk, DataChunk):
        chunk = DataChunk(chunk)
    config = config or EmConfig()
    if int(k) < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    rng = np.random.default_rng(rng)
    points = chunk.points
    k = min(int(k), points.shape[0])

    _, _, _, resp, converged, n_iter, trace = run_em(points, k, config, rng)
    raw = np.argmax(resp, axis=1)
    used = np.unique(raw)
    remap = np.full(k, -1, dtype=np.int64)
    remap[used] = np.arange(used.shape[0])
    assignments = remap[raw]
    signatures = [
        ClusterSignature.from_points(points[assignments == j], id=j, chunk_index=chunk.chunk_index)
        for j in range(used.shape[0])
    ]
    return ChunkClustering(
        signatures=signatures,
        assignments=assignments,
        responsibilities_converged=converged,
        iterations_used=n_iter,
        chunk_index=chunk.chunk_index,
        log_likelihood_trace=trace,
    )


class ChunkGaussianMixture(ClusterMixin, BaseEstimator):
    """Full-covariance Gaussian mixture with hard-assigned exact signatures.

    This is the fitter used on every stream chunk, exposed with the usual
    estimator interface so it can also serve as a whole-dataset baseline.

    Parameters
    ----------
    n_components : int, default=30
    max_iter : int, default=100
    tol : float, default=1e-6
        Relative log-likelihood improvement below which EM stops.
    epsilon_scale : float, default=1e-6
        Covariance ridge relative to the data scale.
    random_state : int, Generator or None

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
    signatures_ : list of ClusterSignature
    means_ : ndarray of shape (n_clusters, n_features)
    covariances_ : ndarray of shape (n_clusters, n_features, n_features)
    converged_ : bool
    n_iter_ : int
    log_likelihood_trace_ : list of float
    """

    def __init__(self, n_components=30, max_iter=100, tol=1e-6, epsilon_scale=DEFAULT_EPSILON_SCALE,
                 random_state=None):
        self.n_components = n_components
        self.max_iter = max_iter
        self.tol = tol
        self.epsilon_scale = epsilon_scale
        self.random_state = random_state

    def fit(self, X, y=None):
        X = validate_input(self, X, reset=True)
        config = EmConfig(self.max_iter, self.tol, self.epsilon_scale)
        result = fit_chunk(X, self.n_components, config, self.random_state)
        self.labels_ = result.assignments
        self.signatures_ = result.signatures
        self.means_ = np.array([s.mean for s in result.signatures])
        self.covariances_ = np.array([s.covariance for s in result.signatures])
        self.converged_ = result.responsibilities_converged
        self.n_iter_ = result.iterations_used
        self.log_likelihood_trace_ = result.log_likelihood_trace
        return self

    def predict(self, X):
        """Label each row by maximum posterior under the fitted signatures."""
        check_is_fitted(self, "signatures_")
        X = validate_input(self, X, reset=False)
        n = np.array([s.num_points for s in self.signatures_], dtype=np.float64)
        covs = np.array([regularize(s.covariance, self.epsilon_scale) for s in self.signatures_])
        log_prob = _estimate_log_prob(X, n / n.sum(), self.means_, covs)
        return np.argmax(log_prob, axis=1)
