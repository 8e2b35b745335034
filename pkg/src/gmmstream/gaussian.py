"""Gaussian cluster signatures and the scalar quantities computed from them.

A signature is the sufficient statistic ``(n, mean, covariance)`` of a point
set, with the covariance taken as the population (divide-by-``n``) estimate.
That convention makes :func:`merge_signatures` exact: merging two signatures
gives the same triple as computing statistics on the pooled points.

Signatures always hold the *exact* covariance. Anything that needs a strictly
positive definite matrix (entropy, Mahalanobis distance) regularizes on the fly
with :func:`regularize`, so repeated merging never accumulates ridge terms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .exceptions import DegenerateCovariance, DimensionError

DEFAULT_EPSILON_SCALE = 1e-6
DEFAULT_FLOOR = 1e-12

_LOG2_2PI_E = float(np.log2(2.0 * np.pi * np.e))


def symmetrize(matrix):
    """Return a copy of ``matrix`` mirrored from its upper triangle.

    The result is symmetric bit for bit, not just to rounding error.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    upper = np.triu(matrix)
    return upper + np.triu(matrix, 1).T


@dataclass
class ClusterSignature:
    """Count, mean and full covariance of one evolving cluster.

    Attributes
    ----------
    id : int
        Identifier, unique within a sketch.
    num_points : int
        Number of points summarized.
    mean : ndarray of shape (d,)
    covariance : ndarray of shape (d, d)
        Population covariance (exactly symmetric, not regularized).
    created_at_chunk : int
        Index of the chunk in which the cluster first appeared.
    growth_log : list of (int, int)
        ``(chunk_index, points_added)`` pairs sorted by chunk; the counts sum
        to ``num_points``.
    """

    id: int
    num_points: int
    mean: np.ndarray
    covariance: np.ndarray
    created_at_chunk: int = 0
    growth_log: list = field(default_factory=list)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        self.covariance = symmetrize(np.atleast_2d(self.covariance))
        d = self.mean.shape[0]
        if self.covariance.shape != (d, d):
            raise DimensionError(
                f"covariance shape {self.covariance.shape} does not match mean dimension {d}"
            )
        if int(self.num_points) < 1:
            raise ValueError(f"num_points must be >= 1, got {self.num_points}")
        self.num_points = int(self.num_points)
        self.growth_log = [(int(c), int(n)) for c, n in self.growth_log]
        if not self.growth_log:
            self.growth_log = [(int(self.created_at_chunk), self.num_points)]

    @property
    def dimension(self):
        return self.mean.shape[0]

    @classmethod
    def from_points(cls, points, id=0, chunk_index=0):
        """Build the exact population signature of a point set."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        n = points.shape[0]
        if n == 0:
            raise ValueError("cannot build a signature from zero points")
        mean = points.mean(axis=0)
        centered = points - mean
        cov = centered.T @ centered / n
        return cls(
            id=id,
            num_points=n,
            mean=mean,
            covariance=cov,
            created_at_chunk=chunk_index,
            growth_log=[(chunk_index, n)],
        )

    def copy(self):
        return ClusterSignature(
            id=self.id,
            num_points=self.num_points,
            mean=self.mean.copy(),
            covariance=self.covariance.copy(),
            created_at_chunk=self.created_at_chunk,
            growth_log=list(self.growth_log),
        )


def regularize(cov, epsilon_scale=DEFAULT_EPSILON_SCALE, floor=DEFAULT_FLOOR):
    """Add a small ridge so that ``cov`` becomes strictly positive definite.

    The ridge is ``max(epsilon_scale * trace(cov) / d, floor)``: relative to the
    matrix's own scale, with an absolute floor so a zero matrix (single-point
    cluster) still comes out positive definite.

    Parameters
    ----------
    cov : array-like of shape (d, d)
    epsilon_scale : float
    floor : float

    Returns
    -------
    ndarray of shape (d, d)
    """
    cov = symmetrize(np.atleast_2d(cov))
    d = cov.shape[0]
    eps = max(epsilon_scale * float(np.trace(cov)) / d, floor)
    out = cov.copy()
    out.flat[:: d + 1] += eps
    return out


def cholesky(cov):
    """Lower Cholesky factor, raising :class:`DegenerateCovariance` on failure."""
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    if not np.all(np.isfinite(cov)):
        raise DegenerateCovariance("covariance contains non-finite entries")
    try:
        factor = linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError as exc:
        raise DegenerateCovariance(f"covariance is not positive definite: {exc}") from None
    if np.any(np.diag(factor) <= 0.0):
        raise DegenerateCovariance("covariance determinant is not positive")
    return factor


def log2_det(cov):
    """Base-2 log determinant of a positive definite matrix."""
    factor = cholesky(cov)
    return 2.0 * float(np.sum(np.log2(np.diag(factor))))


def entropy(cov):
    """Differential entropy in bits of a Gaussian with covariance ``cov``.

    ``h = (d/2) log2(2 pi e) + (1/2) log2 det(cov)``. Can be negative for
    tightly packed clusters.

    Raises
    ------
    DegenerateCovariance
        If ``cov`` is not strictly positive definite.
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    d = cov.shape[0]
    return 0.5 * d * _LOG2_2PI_E + 0.5 * log2_det(cov)


def mahalanobis_many(points, mean, cov):
    """Mahalanobis distances of each row of ``points`` from ``(mean, cov)``.

    ``cov`` must already be positive definite.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    mean = np.asarray(mean, dtype=np.float64).reshape(-1)
    if points.shape[1] != mean.shape[0]:
        raise DimensionError(
            f"point dimension {points.shape[1]} does not match cluster dimension {mean.shape[0]}"
        )
    factor = cholesky(cov)
    z = linalg.solve_triangular(factor, (points - mean).T, lower=True)
    return np.sqrt(np.sum(z * z, axis=0))


def mahalanobis(point, sig, epsilon_scale=None):
    """Mahalanobis distance ``sqrt((x - mu)^T inv(cov) (x - mu))``.

    Parameters
    ----------
    point : array-like of shape (d,)
    sig : ClusterSignature
    epsilon_scale : float or None
        When given, the signature's covariance is passed through
        :func:`regularize` first. Otherwise it must already be positive
        definite.
    """
    point = np.asarray(point, dtype=np.float64).reshape(-1)
    if point.shape[0] != sig.dimension:
        raise DimensionError(
            f"point dimension {point.shape[0]} does not match cluster dimension {sig.dimension}"
        )
    cov = sig.covariance if epsilon_scale is None else regularize(sig.covariance, epsilon_scale)
    return float(mahalanobis_many(point[None, :], sig.mean, cov)[0])


def _merge_growth_logs(a, b):
    totals = {}
    for chunk, count in list(a) + list(b):
        totals[chunk] = totals.get(chunk, 0) + count
    return sorted(totals.items())


def merge_signatures(a, b, id=None):
    """Signature of the union of the point sets summarized by ``a`` and ``b``.

    The merged covariance adds the between-cluster scatter of each member mean
    around the pooled mean to the count-weighted member covariances, all
    divided by the pooled count. The result equals the population statistics
    of the concatenated points exactly.

    Parameters
    ----------
    a, b : ClusterSignature
    id : int, optional
        Id of the result; defaults to ``a.id``.

    Returns
    -------
    ClusterSignature
    """
    if a.dimension != b.dimension:
        raise DimensionError(f"cannot merge signatures of dimension {a.dimension} and {b.dimension}")
    n = a.num_points + b.num_points
    wa = a.num_points / n
    wb = b.num_points / n
    mean = wa * a.mean + wb * b.mean
    da = a.mean - mean
    db = b.mean - mean
    cov = (
        wa * a.covariance
        + wb * b.covariance
        + wa * np.outer(da, da)
        + wb * np.outer(db, db)
    )
    return ClusterSignature(
        id=a.id if id is None else id,
        num_points=n,
        mean=mean,
        covariance=cov,
        created_at_chunk=min(a.created_at_chunk, b.created_at_chunk),
        growth_log=_merge_growth_logs(a.growth_log, b.growth_log),
    )
