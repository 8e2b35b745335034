"""Greedy entropy-guarded reduction of the base set.

Compression works on a copy of the sketch and merges one pair of base
clusters at a time: the pair, among each cluster's nearest peers, whose merge
raises entropy the least relative to its larger member. When no pair fits
under the current percentage thresholds they are relaxed step by step. After
every merge each stored anomaly is rescored, which yields its compression
profile.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .anomaly import nearest_scores
from .exceptions import ConfigError, StateError, NoOpWarning
from .gaussian import merge_signatures
from .merge import evaluate_merge, nearest_indices


@dataclass
class CompressionSchedule:
    """Starting thresholds, relaxation step and stopping rule.

    With ``target_k=None`` no relaxation happens: only merges that pass the
    initial thresholds are executed.

    Once thresholds have been relaxed, a pair whose smaller member has fewer
    than ``small_cluster_cutoff`` points is judged on the larger member's
    entropy increase alone, as small chunk clusters are during streaming.
    Tight fragments otherwise show a large relative increase on their own
    side and would outlive merges of genuinely distinct clusters. Set it to
    0 to always require both thresholds.
    """

    initial_de1_pct: float = 0.0
    initial_de2_pct: float = 0.0
    step_pct: float = 5.0
    max_pct: float = 100.0
    target_k: int | None = None
    candidate_count: int = 4
    small_cluster_cutoff: int = 20

    def __post_init__(self):
        for name in ("initial_de1_pct", "initial_de2_pct", "step_pct", "max_pct"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ConfigError(f"{name} must be finite, got {value}")
            setattr(self, name, value)
        if self.step_pct <= 0:
            raise ConfigError(f"step_pct must be > 0, got {self.step_pct}")
        if self.target_k is not None:
            self.target_k = int(self.target_k)
            if self.target_k < 1:
                raise ConfigError(f"target_k must be >= 1, got {self.target_k}")
        if int(self.candidate_count) < 1:
            raise ConfigError(f"candidate_count must be >= 1, got {self.candidate_count}")
        self.candidate_count = int(self.candidate_count)
        self.small_cluster_cutoff = int(self.small_cluster_cutoff)


@dataclass(frozen=True)
class CompressionStep:
    """One executed merge. ``delta_e1_pct`` is relative to the survivor."""

    step: int
    survivor_id: int
    absorbed_id: int
    cluster_count_after: int
    total_points_after: int
    e1: float
    e2: float
    e_merged: float
    delta_e1_pct: float
    delta_e2_pct: float
    de1_threshold: float
    de2_threshold: float

    def as_row(self):
        return asdict(self)


def _orient(a, b):
    # the larger cluster plays the base role and keeps its id
    if (b.num_points, -b.id) > (a.num_points, -a.id):
        return b, a
    return a, b


def _candidate_pairs(signatures, m, eps, cache):
    pairs = {}
    for sig in signatures:
        for pos in nearest_indices(sig.mean, signatures, m, exclude=sig.id):
            other = signatures[pos]
            key = (min(sig.id, other.id), max(sig.id, other.id))
            if key in pairs:
                continue
            primary, secondary = _orient(sig, other)
            ckey = (primary.id, secondary.id)
            if ckey not in cache:
                cache[ckey] = evaluate_merge(primary, secondary, eps)
            pairs[key] = (primary.id, secondary.id, cache[ckey])
    return list(pairs.values())


def _passes(pair, t1, t2, sizes, small_cutoff):
    _, secondary_id, ev = pair
    if ev.delta_e1_pct > t1:
        return False
    return sizes[secondary_id] < small_cutoff or ev.delta_e2_pct <= t2


def _rescore(sketch):
    if not sketch.anomalies:
        return
    scores, nearest = nearest_scores(np.array([a.point for a in sketch.anomalies]),
                                     sketch.base_signatures, sketch.epsilon_scale)
    count = len(sketch.base_signatures)
    for rec, score, cid in zip(sketch.anomalies, scores, nearest):
        rec.compression_scores.append((count, float(score), int(cid)))


def compress(sketch, schedule=None):
    """Reduce the number of base clusters by greedy pairwise merging.

    The input sketch is not modified.

    Parameters
    ----------
    sketch : SketchState
    schedule : CompressionSchedule, optional

    Returns
    -------
    compressed : SketchState
    trace : list of CompressionStep
    """
    schedule = schedule or CompressionSchedule()
    if not sketch.base_signatures:
        raise StateError("cannot compress an empty sketch")
    work = sketch.copy()
    target = schedule.target_k
    if target is not None and target > len(work.base_signatures):
        warnings.warn(
            f"target_k={target} exceeds the current {len(work.base_signatures)} clusters; nothing to do",
            NoOpWarning,
            stacklevel=2,
        )
        return work, []

    eps = work.epsilon_scale
    t1, t2 = schedule.initial_de1_pct, schedule.initial_de2_pct
    small_cutoff = 0
    cache = {}
    trace = []
    while len(work.base_signatures) > 1:
        if target is not None and len(work.base_signatures) <= target:
            break
        sizes = {sig.id: sig.num_points for sig in work.base_signatures}
        pairs = _candidate_pairs(work.base_signatures, schedule.candidate_count, eps, cache)
        passing = [p for p in pairs if _passes(p, t1, t2, sizes, small_cutoff)]
        if not passing:
            if target is None:
                break
            t1 += schedule.step_pct
            t2 += schedule.step_pct
            small_cutoff = schedule.small_cluster_cutoff
            if max(t1, t2) > schedule.max_pct:
                break
            continue

        survivor_id, absorbed_id, ev = min(
            passing,
            key=lambda p: (p[2].delta_e1_pct, p[2].delta_e2_pct, min(p[0], p[1]), max(p[0], p[1])),
        )
        ids = work.cluster_ids
        spos, apos = ids.index(survivor_id), ids.index(absorbed_id)
        merged = merge_signatures(work.base_signatures[spos], work.base_signatures[apos], id=survivor_id)
        work.base_signatures[spos] = merged
        del work.base_signatures[apos]
        for key in [k for k in cache if survivor_id in k or absorbed_id in k]:
            del cache[key]

        _rescore(work)
        trace.append(CompressionStep(
            step=len(trace),
            survivor_id=survivor_id,
            absorbed_id=absorbed_id,
            cluster_count_after=len(work.base_signatures),
            total_points_after=work.total_points,
            e1=ev.e1,
            e2=ev.e2,
            e_merged=ev.e_merged,
            delta_e1_pct=ev.delta_e1_pct,
            delta_e2_pct=ev.delta_e2_pct,
            de1_threshold=t1,
            de2_threshold=t2,
        ))
    return work, trace


def compression_profile(sketch):
    """Per-anomaly ``[(cluster_count, score), ...]`` series, fewest clusters last."""
    return {
        rec.id: [(int(count), float(score)) for count, score, _ in rec.compression_scores]
        for rec in sketch.anomalies
    }
