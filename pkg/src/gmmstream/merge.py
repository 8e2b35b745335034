"""Temporal update of the base set from one chunk's clusters.

Each chunk cluster is compared with its nearest base clusters (Euclidean
distance between centroids). A candidate is acceptable when merging does not
raise entropy by more than a percentage threshold; the acceptable candidate
with the smallest increase absorbs the chunk cluster. Chunk clusters with no
acceptable candidate join the base set as new clusters.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import ConfigError, DimensionError
from .gaussian import entropy, merge_signatures, regularize

# Below this magnitude the entropy is treated as zero when forming percentages.
_MIN_DENOMINATOR = 1e-9


@dataclass
class MergeThresholds:
    """Percentage entropy-increase limits for absorbing a chunk cluster.

    Chunk clusters with at least ``small_cluster_cutoff`` points must satisfy
    both ``large_chunk_*`` limits; smaller ones only need
    ``small_chunk_de1_pct``.
    """

    large_chunk_de1_pct: float = 5.0
    large_chunk_de2_pct: float = 10.0
    small_chunk_de1_pct: float = 10.0
    small_cluster_cutoff: int = 10
    candidate_count: int = 4

    def __post_init__(self):
        for name in ("large_chunk_de1_pct", "large_chunk_de2_pct", "small_chunk_de1_pct"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ConfigError(f"{name} must be finite, got {value}")
            setattr(self, name, value)
        if int(self.candidate_count) < 1:
            raise ConfigError(f"candidate_count must be >= 1, got {self.candidate_count}")
        self.candidate_count = int(self.candidate_count)
        self.small_cluster_cutoff = int(self.small_cluster_cutoff)

    def accepts(self, evaluation, chunk_points):
        if chunk_points >= self.small_cluster_cutoff:
            return (evaluation.delta_e1_pct < self.large_chunk_de1_pct
                    and evaluation.delta_e2_pct < self.large_chunk_de2_pct)
        return evaluation.delta_e1_pct < self.small_chunk_de1_pct


@dataclass(frozen=True)
class MergeEvaluation:
    """Entropies of two clusters and of their hypothetical merge.

    ``delta_e1_pct`` and ``delta_e2_pct`` are the percentage changes of the
    merged entropy relative to the first and second member.
    """

    base_id: int
    e1: float
    e2: float
    e_merged: float
    delta_e1_pct: float
    delta_e2_pct: float


@dataclass(frozen=True)
class MergeDecision:
    """Audit record for one chunk cluster.

    ``assigned_base_id`` is the base cluster the chunk cluster ended up in:
    ``chosen_base_id`` when merged, otherwise the id issued on appending.
    The entropy fields describe the chosen candidate, or the best rejected one
    when nothing was chosen (NaN when there were no candidates).
    """

    chunk_index: int
    chunk_cluster_ref: int
    chunk_num_points: int
    candidate_base_ids: tuple
    chosen_base_id: int | None
    assigned_base_id: int
    e1: float
    e2: float
    e_merged: float
    delta_e1_pct: float
    delta_e2_pct: float
    evaluations: tuple = ()

    @classmethod
    def appended(cls, chunk_index, ref, num_points, new_id, evaluations=(), best=None):
        nan = float("nan")
        return cls(
            chunk_index=chunk_index,
            chunk_cluster_ref=ref,
            chunk_num_points=num_points,
            candidate_base_ids=tuple(e.base_id for e in evaluations),
            chosen_base_id=None,
            assigned_base_id=new_id,
            e1=best.e1 if best else nan,
            e2=best.e2 if best else nan,
            e_merged=best.e_merged if best else nan,
            delta_e1_pct=best.delta_e1_pct if best else nan,
            delta_e2_pct=best.delta_e2_pct if best else nan,
            evaluations=tuple(evaluations),
        )

    def as_row(self):
        """Flat dict suitable for CSV/JSON export."""
        row = asdict(self)
        row.pop("evaluations")
        row["candidate_base_ids"] = " ".join(str(i) for i in self.candidate_base_ids)
        row["outcome"] = "merged" if self.chosen_base_id is not None else "appended"
        return row


def percent_change(new, reference):
    """``(new - reference) / |reference| * 100`` with a guarded denominator."""
    denom = max(abs(reference), _MIN_DENOMINATOR)
    return (new - reference) / denom * 100.0


def evaluate_merge(base, chunk, epsilon_scale=None):
    """Entropy change from merging ``chunk`` into ``base``.

    Parameters
    ----------
    base, chunk : ClusterSignature
    epsilon_scale : float, optional
        Ridge applied to every covariance before taking entropies. ``None``
        uses the covariances as given (they must be positive definite).

    Returns
    -------
    MergeEvaluation
    """
    def _h(cov):
        return entropy(cov if epsilon_scale is None else regularize(cov, epsilon_scale))

    merged = merge_signatures(base, chunk)
    e1 = _h(base.covariance)
    e2 = _h(chunk.covariance)
    e = _h(merged.covariance)
    return MergeEvaluation(
        base_id=base.id,
        e1=e1,
        e2=e2,
        e_merged=e,
        delta_e1_pct=percent_change(e, e1),
        delta_e2_pct=percent_change(e, e2),
    )


def nearest_indices(mean, signatures, m, exclude=None):
    """Positions in ``signatures`` of the ``m`` centroids nearest ``mean``.

    Ties are broken by lower cluster id.
    """
    pool = [i for i, s in enumerate(signatures) if s.id != exclude]
    if not pool:
        return []
    means = np.array([signatures[i].mean for i in pool])
    ids = np.array([signatures[i].id for i in pool])
    dist = np.sum((means - mean) ** 2, axis=1)
    order = np.lexsort((ids, dist))[:m]
    return [pool[i] for i in order]


def nearest_candidates(chunk_sig, sketch, m):
    """Ids of the ``min(m, len(sketch))`` base clusters nearest ``chunk_sig``."""
    sigs = sketch.base_signatures
    return [sigs[i].id for i in nearest_indices(chunk_sig.mean, sigs, m)]


def apply_chunk(sketch, clustering, thresholds=None):
    """Merge one chunk's clusters into the sketch's base set, in place.

    Chunk clusters are handled largest first, each against the base set as
    already updated by the chunk clusters before it. Among acceptable
    candidates the smallest ``delta_e1_pct`` wins, then the smallest
    ``delta_e2_pct``, then the lowest base id.

    Parameters
    ----------
    sketch : SketchState
    clustering : ChunkClustering
    thresholds : MergeThresholds, optional

    Returns
    -------
    list of MergeDecision
        One per chunk cluster, in processing order.
    """
    thresholds = thresholds or MergeThresholds()
    if clustering.signatures and clustering.dimension != sketch.dimensionality:
        raise DimensionError(
            f"chunk dimension {clustering.dimension} does not match sketch dimension {sketch.dimensionality}"
        )
    eps = sketch.epsilon_scale
    chunk_index = sketch.chunks_processed
    order = sorted(range(len(clustering.signatures)),
                   key=lambda j: (-clustering.signatures[j].num_points, j))
    decisions = []
    for ref in order:
        csig = clustering.signatures[ref]
        positions = nearest_indices(csig.mean, sketch.base_signatures, thresholds.candidate_count)
        evaluations = [evaluate_merge(sketch.base_signatures[p], csig, eps) for p in positions]
        accepted = [(ev.delta_e1_pct, ev.delta_e2_pct, ev.base_id, p, ev)
                    for p, ev in zip(positions, evaluations)
                    if thresholds.accepts(ev, csig.num_points)]
        if accepted:
            _, _, base_id, pos, best = min(accepted, key=lambda t: t[:3])
            incoming = csig.copy()
            incoming.growth_log = [(chunk_index, csig.num_points)]
            incoming.created_at_chunk = chunk_index
            sketch.base_signatures[pos] = merge_signatures(sketch.base_signatures[pos], incoming)
            decisions.append(MergeDecision(
                chunk_index=chunk_index,
                chunk_cluster_ref=ref,
                chunk_num_points=csig.num_points,
                candidate_base_ids=tuple(ev.base_id for ev in evaluations),
                chosen_base_id=base_id,
                assigned_base_id=base_id,
                e1=best.e1,
                e2=best.e2,
                e_merged=best.e_merged,
                delta_e1_pct=best.delta_e1_pct,
                delta_e2_pct=best.delta_e2_pct,
                evaluations=tuple(evaluations),
            ))
        else:
            new = sketch.add_signature(csig, chunk_index)
            best = min(evaluations, key=lambda ev: (ev.delta_e1_pct, ev.delta_e2_pct, ev.base_id),
                       default=None)
            decisions.append(MergeDecision.appended(chunk_index, ref, csig.num_points, new.id,
                                                    evaluations, best))
    sketch.chunks_processed += 1
    return decisions


def drift_report(sketch):
    """Cumulative point-count trajectory of every base cluster.

    Returns
    -------
    dict
        ``{cluster_id: {"created_at_chunk": int, "points_added": ndarray,
        "trajectory": ndarray}}``. Both arrays have one entry per processed
        chunk; the trajectory is zero before the cluster's creation.
    """
    n_chunks = max(sketch.chunks_processed,
                   1 + max((c for s in sketch.base_signatures for c, _ in s.growth_log), default=-1))
    report = {}
    for sig in sketch.base_signatures:
        added = np.zeros(n_chunks, dtype=np.int64)
        for chunk, count in sig.growth_log:
            added[chunk] += count
        report[sig.id] = {
            "created_at_chunk": sig.created_at_chunk,
            "points_added": added,
            "trajectory": np.cumsum(added),
        }
    return report


def drift_rows(sketch):
    """Long-format drift table: one row per (cluster, chunk)."""
    rows = []
    for cid, entry in drift_report(sketch).items():
        for chunk, (added, total) in enumerate(zip(entry["points_added"], entry["trajectory"])):
            rows.append({
                "cluster_id": cid,
                "created_at_chunk": entry["created_at_chunk"],
                "chunk_index": chunk,
                "points_added": int(added),
                "cumulative_points": int(total),
            })
    return rows
