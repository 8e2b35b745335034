"""The persistent stream summary and its on-disk format.

Sketch files are JSON lines. The first line is a header::

    {"format": "gmmstream-sketch", "version": 1, "dimensionality": 2,
     "chunks_processed": 30, "next_cluster_id": 71, "next_anomaly_id": 12,
     "num_clusters": 58, "num_anomalies": 12, "config": {...}}

followed by one ``{"record": "cluster", ...}`` line per base signature and
one ``{"record": "anomaly", ...}`` line per anomaly record. Floats are written
with Python's shortest round-trip repr, so loading is bit-exact.
"""

from __future__ import annotations

import copy
import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionError, FormatError
from .gaussian import DEFAULT_EPSILON_SCALE, ClusterSignature

FORMAT_NAME = "gmmstream-sketch"
FORMAT_VERSION = 1


@dataclass
class AnomalyRecord:
    """A point flagged as anomalous, with its score histories.

    Attributes
    ----------
    id : int
    point : ndarray of shape (d,)
    first_seen_chunk : int
    nearest_cluster_id : int
        Nearest base cluster (by Mahalanobis distance) as of the latest rescoring.
    detection_cluster_id : int
        Base cluster the point's chunk cluster was merged into (or became).
    detection_score : float
        Mahalanobis distance from that cluster at detection time.
    temporal_scores : list of (chunk_index, score, nearest_cluster_id)
    compression_scores : list of (cluster_count, score, nearest_cluster_id)
    """

    id: int
    point: np.ndarray
    first_seen_chunk: int
    nearest_cluster_id: int
    detection_cluster_id: int
    detection_score: float
    temporal_scores: list = field(default_factory=list)
    compression_scores: list = field(default_factory=list)

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=np.float64).reshape(-1)

    @property
    def current_score(self):
        return self.temporal_scores[-1][1] if self.temporal_scores else self.detection_score


@dataclass
class SketchState:
    """Everything retained about the stream once raw points are discarded."""

    dimensionality: int
    base_signatures: list = field(default_factory=list)
    anomalies: list = field(default_factory=list)
    next_cluster_id: int = 0
    next_anomaly_id: int = 0
    chunks_processed: int = 0
    config_snapshot: dict = field(default_factory=dict)

    @property
    def epsilon_scale(self):
        return float(self.config_snapshot.get("em", {}).get("epsilon_scale", DEFAULT_EPSILON_SCALE))

    @property
    def total_points(self):
        return sum(s.num_points for s in self.base_signatures)

    @property
    def cluster_ids(self):
        return [s.id for s in self.base_signatures]

    def __len__(self):
        return len(self.base_signatures)

    def get(self, cluster_id):
        for sig in self.base_signatures:
            if sig.id == cluster_id:
                return sig
        raise KeyError(cluster_id)

    def issue_cluster_id(self):
        cid = self.next_cluster_id
        self.next_cluster_id += 1
        return cid

    def issue_anomaly_id(self):
        aid = self.next_anomaly_id
        self.next_anomaly_id += 1
        return aid

    def add_signature(self, sig, chunk_index):
        """Append ``sig`` as a new base cluster with a freshly issued id."""
        if sig.dimension != self.dimensionality:
            raise DimensionError(
                f"signature dimension {sig.dimension} does not match sketch dimension {self.dimensionality}"
            )
        new = sig.copy()
        new.id = self.issue_cluster_id()
        new.created_at_chunk = chunk_index
        new.growth_log = [(chunk_index, new.num_points)]
        self.base_signatures.append(new)
        return new

    def copy(self):
        return copy.deepcopy(self)


def init_from_first_chunk(clustering, points, anomaly_config=None, config_snapshot=None):
    """Create a sketch whose base set is the first chunk's clusters.

    Parameters
    ----------
    clustering : ChunkClustering
    points : ndarray of shape (n, d)
        The chunk's points, used only to flag anomalies and then dropped.
    anomaly_config : AnomalyConfig, optional
    config_snapshot : dict, optional
        Stored verbatim in the sketch.

    Returns
    -------
    SketchState
    """
    from .anomaly import AnomalyConfig, flag_chunk_anomalies
    from .merge import MergeDecision

    sketch = SketchState(
        dimensionality=clustering.dimension,
        config_snapshot=dict(config_snapshot or {}),
    )
    decisions = []
    for ref, sig in enumerate(clustering.signatures):
        new = sketch.add_signature(sig, 0)
        decisions.append(MergeDecision.appended(0, ref, sig.num_points, new.id))
    sketch.chunks_processed = 1
    flag_chunk_anomalies(points, clustering, sketch, decisions, anomaly_config or AnomalyConfig())
    return sketch


def _signature_to_record(sig):
    return {
        "record": "cluster",
        "id": sig.id,
        "num_points": sig.num_points,
        "created_at_chunk": sig.created_at_chunk,
        "mean": sig.mean.tolist(),
        "covariance": sig.covariance.tolist(),
        "growth_log": [list(entry) for entry in sig.growth_log],
    }


def _anomaly_to_record(rec):
    return {
        "record": "anomaly",
        "id": rec.id,
        "point": rec.point.tolist(),
        "first_seen_chunk": rec.first_seen_chunk,
        "nearest_cluster_id": rec.nearest_cluster_id,
        "detection_cluster_id": rec.detection_cluster_id,
        "detection_score": rec.detection_score,
        "temporal_scores": [[int(c), float(s), int(i)] for c, s, i in rec.temporal_scores],
        "compression_scores": [[int(c), float(s), int(i)] for c, s, i in rec.compression_scores],
    }


def dumps(sketch):
    """Serialize ``sketch`` to the JSON-lines sketch format."""
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "dimensionality": sketch.dimensionality,
        "chunks_processed": sketch.chunks_processed,
        "next_cluster_id": sketch.next_cluster_id,
        "next_anomaly_id": sketch.next_anomaly_id,
        "num_clusters": len(sketch.base_signatures),
        "num_anomalies": len(sketch.anomalies),
        "config": sketch.config_snapshot,
    }
    lines = [header]
    lines.extend(_signature_to_record(s) for s in sketch.base_signatures)
    lines.extend(_anomaly_to_record(a) for a in sketch.anomalies)
    return "".join(json.dumps(line, allow_nan=False) + "\n" for line in lines)


def save(sketch, path):
    """Write ``sketch`` to ``path`` atomically."""
    text = dumps(sketch)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".sketch-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _require(record, key, lineno):
    try:
        return record[key]
    except KeyError:
        raise FormatError(f"line {lineno}: missing field {key!r}") from None


def loads(text):
    """Parse the JSON-lines sketch format produced by :func:`dumps`."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty sketch file")
    records = []
    for lineno, line in enumerate(lines, start=1):
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise FormatError(f"line {lineno}: invalid JSON ({exc.msg})") from None
    header = records[0]
    if not isinstance(header, dict) or header.get("format") != FORMAT_NAME:
        raise FormatError(f"not a sketch file: header format is {header.get('format')!r}"
                          if isinstance(header, dict) else "not a sketch file")
    version = header.get("version")
    if version != FORMAT_VERSION:
        raise FormatError(
            f"unsupported sketch version {version!r}; this build reads version {FORMAT_VERSION}"
        )
    d = int(_require(header, "dimensionality", 1))
    sketch = SketchState(
        dimensionality=d,
        next_cluster_id=int(_require(header, "next_cluster_id", 1)),
        next_anomaly_id=int(_require(header, "next_anomaly_id", 1)),
        chunks_processed=int(_require(header, "chunks_processed", 1)),
        config_snapshot=header.get("config", {}) or {},
    )
    try:
        for lineno, rec in enumerate(records[1:], start=2):
            kind = _require(rec, "record", lineno)
            if kind == "cluster":
                sig = ClusterSignature(
                    id=int(_require(rec, "id", lineno)),
                    num_points=int(_require(rec, "num_points", lineno)),
                    mean=np.array(_require(rec, "mean", lineno), dtype=np.float64),
                    covariance=np.array(_require(rec, "covariance", lineno), dtype=np.float64),
                    created_at_chunk=int(_require(rec, "created_at_chunk", lineno)),
                    growth_log=[tuple(e) for e in _require(rec, "growth_log", lineno)],
                )
                if sig.dimension != d:
                    raise FormatError(f"line {lineno}: cluster dimension {sig.dimension} != {d}")
                sketch.base_signatures.append(sig)
            elif kind == "anomaly":
                point = np.array(_require(rec, "point", lineno), dtype=np.float64)
                if point.shape != (d,):
                    raise FormatError(f"line {lineno}: anomaly point has shape {point.shape}, expected ({d},)")
                sketch.anomalies.append(AnomalyRecord(
                    id=int(_require(rec, "id", lineno)),
                    point=point,
                    first_seen_chunk=int(_require(rec, "first_seen_chunk", lineno)),
                    nearest_cluster_id=int(_require(rec, "nearest_cluster_id", lineno)),
                    detection_cluster_id=int(_require(rec, "detection_cluster_id", lineno)),
                    detection_score=float(_require(rec, "detection_score", lineno)),
                    temporal_scores=[(int(c), float(s), int(i))
                                     for c, s, i in _require(rec, "temporal_scores", lineno)],
                    compression_scores=[(int(c), float(s), int(i))
                                        for c, s, i in _require(rec, "compression_scores", lineno)],
                ))
            else:
                raise FormatError(f"line {lineno}: unknown record type {kind!r}")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"malformed record: {exc}") from None

    if len(sketch.base_signatures) != header.get("num_clusters", len(sketch.base_signatures)):
        raise FormatError(
            f"header declares {header['num_clusters']} clusters, file holds {len(sketch.base_signatures)}"
        )
    if len(sketch.anomalies) != header.get("num_anomalies", len(sketch.anomalies)):
        raise FormatError(
            f"header declares {header['num_anomalies']} anomalies, file holds {len(sketch.anomalies)}"
        )
    ids = sketch.cluster_ids
    if len(set(ids)) != len(ids):
        raise FormatError("duplicate cluster ids")
    if ids and max(ids) >= sketch.next_cluster_id:
        raise FormatError("next_cluster_id does not exceed every issued id")
    return sketch


def load(path):
    """Read a sketch file written by :func:`save`."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except UnicodeDecodeError:
        raise FormatError(f"{path}: not a text sketch file") from None
    return loads(text)
