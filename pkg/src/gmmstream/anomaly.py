"""Anomaly flagging and score tracking.

A point's anomaly score is its smallest Mahalanobis distance to any base
cluster. Scores are recomputed after every chunk (temporal profile) and after
every compression merge (compression profile).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError
from .gaussian import mahalanobis_many, regularize
from .sketch import AnomalyRecord


@dataclass
class AnomalyConfig:
    """Mahalanobis cutoffs.

    Points scoring above ``store_threshold`` are kept in the sketch; those
    above ``flag_threshold`` are reported as anomalous. A lower store
    threshold keeps borderline points under watch.
    """

    flag_threshold: float = 3.0
    store_threshold: float = 3.0

    def __post_init__(self):
        self.flag_threshold = float(self.flag_threshold)
        self.store_threshold = float(self.store_threshold)
        if not (self.flag_threshold > 0 and self.store_threshold > 0):
            raise ConfigError("anomaly thresholds must be positive")
        if self.store_threshold > self.flag_threshold:
            raise ConfigError(
                f"store_threshold ({self.store_threshold}) must not exceed flag_threshold ({self.flag_threshold})"
            )


def distance_matrix(points, signatures, epsilon_scale):
    """Mahalanobis distances of every point to every signature.

    Returns
    -------
    ndarray of shape (n_points, n_signatures)
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    out = np.empty((points.shape[0], len(signatures)))
    for j, sig in enumerate(signatures):
        out[:, j] = mahalanobis_many(points, sig.mean, regularize(sig.covariance, epsilon_scale))
    return out


def nearest_scores(points, signatures, epsilon_scale):
    """Minimum Mahalanobis distance and the id achieving it, per point.

    Ties go to the lower cluster id.
    """
    order = sorted(range(len(signatures)), key=lambda j: signatures[j].id)
    ordered = [signatures[j] for j in order]
    dist = distance_matrix(points, ordered, epsilon_scale)
    best = np.argmin(dist, axis=1)
    ids = np.array([s.id for s in ordered])
    return dist[np.arange(dist.shape[0]), best], ids[best]


def flag_chunk_anomalies(points, clustering, sketch, decisions, config=None):
    """Store the chunk's anomalous points in the sketch.

    Each point is first scored against the base cluster its chunk cluster
    merged into (or became). It is stored when that score exceeds
    ``config.store_threshold`` and it is also that far from every other base
    cluster. Call after :func:`~gmmstream.merge.apply_chunk`.

    Parameters
    ----------
    points : ndarray of shape (n, d)
        The chunk's points, in the order used by ``clustering.assignments``.
    clustering : ChunkClustering
    sketch : SketchState
    decisions : list of MergeDecision
    config : AnomalyConfig, optional

    Returns
    -------
    list of AnomalyRecord
        The newly created records (already appended to ``sketch.anomalies``).
    """
    config = config or AnomalyConfig()
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if not sketch.base_signatures or points.shape[0] == 0:
        return []
    eps = sketch.epsilon_scale
    chunk_index = sketch.chunks_processed - 1
    target = {d.chunk_cluster_ref: d.assigned_base_id for d in decisions}
    assigned_ids = np.array([target[a] for a in clustering.assignments])

    detection = np.empty(points.shape[0])
    for cid in np.unique(assigned_ids):
        mask = assigned_ids == cid
        sig = sketch.get(int(cid))
        detection[mask] = mahalanobis_many(points[mask], sig.mean, regularize(sig.covariance, eps))

    candidates = np.flatnonzero(detection > config.store_threshold)
    if candidates.size == 0:
        return []
    scores, nearest = nearest_scores(points[candidates], sketch.base_signatures, eps)
    created = []
    for idx, score, cid in zip(candidates, scores, nearest):
        if score <= config.store_threshold:
            continue
        rec = AnomalyRecord(
            id=sketch.issue_anomaly_id(),
            point=points[idx].copy(),
            first_seen_chunk=chunk_index,
            nearest_cluster_id=int(cid),
            detection_cluster_id=int(assigned_ids[idx]),
            detection_score=float(detection[idx]),
            temporal_scores=[(chunk_index, float(score), int(cid))],
        )
        sketch.anomalies.append(rec)
        created.append(rec)
    return created


def rescore_anomalies(sketch, chunk_index=None):
    """Append a fresh temporal score to every stored anomaly.

    Records that already carry an entry for ``chunk_index`` (the ones flagged
    in that chunk) are left alone, so calling this twice is harmless.

    Returns
    -------
    list of AnomalyRecord
        The records that received a new entry.
    """
    if chunk_index is None:
        chunk_index = sketch.chunks_processed - 1
    pending = [a for a in sketch.anomalies
               if not a.temporal_scores or a.temporal_scores[-1][0] != chunk_index]
    if not pending or not sketch.base_signatures:
        return []
    scores, nearest = nearest_scores(np.array([a.point for a in pending]),
                                     sketch.base_signatures, sketch.epsilon_scale)
    for rec, score, cid in zip(pending, scores, nearest):
        rec.temporal_scores.append((chunk_index, float(score), int(cid)))
        rec.nearest_cluster_id = int(cid)
    return pending


def query_anomalies(sketch, min_current_score=0.0):
    """Report rows for anomalies whose current score is at least ``min_current_score``."""
    rows = []
    for rec in sketch.anomalies:
        if rec.current_score < min_current_score:
            continue
        rows.append({
            "anomaly_id": rec.id,
            "point": rec.point.tolist(),
            "first_seen_chunk": rec.first_seen_chunk,
            "current_score": rec.current_score,
            "nearest_cluster_id": rec.nearest_cluster_id,
            "temporal_scores": list(rec.temporal_scores),
        })
    return rows


def anomaly_series_rows(sketch, anomaly_ids=None):
    """Long-format score histories for plotting.

    One row per stored score with columns ``anomaly_id``, ``axis_type``
    (``"temporal"`` or ``"compression"``), ``axis_value`` (chunk index or
    cluster count), ``score`` and ``nearest_cluster``.
    """
    wanted = None if anomaly_ids is None else set(anomaly_ids)
    rows = []
    for rec in sketch.anomalies:
        if wanted is not None and rec.id not in wanted:
            continue
        for axis_type, series in (("temporal", rec.temporal_scores),
                                  ("compression", rec.compression_scores)):
            for axis_value, score, cid in series:
                rows.append({
                    "anomaly_id": rec.id,
                    "axis_type": axis_type,
                    "axis_value": int(axis_value),
                    "score": float(score),
                    "nearest_cluster": int(cid),
                })
    return rows
