"""Estimator front end for the streaming clusterer."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .anomaly import AnomalyConfig, distance_matrix, flag_chunk_anomalies, rescore_anomalies
from .chunk import DataChunk, EmConfig, fit_chunk, validate_input
from .compression import CompressionSchedule, compress
from .config import RunConfig
from .harness import StreamSpec, label_by_sketch
from .merge import MergeThresholds, apply_chunk
from .sketch import init_from_first_chunk


class StreamingGaussianClusterer(ClusterMixin, TransformerMixin, BaseEstimator):
    """Single-pass Gaussian mixture clustering of a chunked stream.

    Every chunk is clustered with EM; the resulting clusters are merged into
    a sketch of full-covariance base clusters whenever the merge barely
    raises entropy, and added as new base clusters otherwise. Points far (in
    Mahalanobis distance) from every base cluster are kept as anomalies and
    rescored after every chunk.

    Parameters
    ----------
    k_per_chunk : int, default=30
        EM components per chunk; deliberately more than the expected number
        of clusters.
    chunk_size : int, default=500
        Rows per chunk when :meth:`fit` splits its input.
    max_iter, tol, epsilon_scale
        EM settings, see :class:`~gmmstream.chunk.EmConfig`.
    large_chunk_de1_pct, large_chunk_de2_pct, small_chunk_de1_pct, small_cluster_cutoff, candidate_count
        Merge rule, see :class:`~gmmstream.merge.MergeThresholds`.
    flag_threshold, store_threshold : float, default=3.0
        Mahalanobis cutoffs for anomalies.
    compression_step_pct, compression_max_pct : float
        Threshold relaxation used by :meth:`compress` and auto-compression.
    compression_small_cutoff : int, default=20
        See :class:`~gmmstream.compression.CompressionSchedule`.
    auto_compress_trigger : int or None
        Compress back to this many clusters whenever a chunk leaves more.
    random_state : int or None
        Seed for EM initialization. Chunk ``i`` uses ``(random_state, i)``.

    Attributes
    ----------
    sketch_ : SketchState
    merge_log_ : list of MergeDecision
    n_chunks_ : int
    n_iter_ : int
        Most EM iterations used by any chunk so far.
    labels_ : ndarray of shape (n_samples,)
        Set by :meth:`fit` only: nearest base cluster of every training row.
    """

    def __init__(self, k_per_chunk=30, chunk_size=500, max_iter=100, tol=1e-6, epsilon_scale=1e-6,
                 large_chunk_de1_pct=5.0, large_chunk_de2_pct=10.0, small_chunk_de1_pct=10.0,
                 small_cluster_cutoff=10, candidate_count=4, flag_threshold=3.0, store_threshold=3.0,
                 compression_step_pct=5.0, compression_max_pct=100.0, compression_small_cutoff=20,
                 auto_compress_trigger=None,
                 random_state=None):
        self.k_per_chunk = k_per_chunk
        self.chunk_size = chunk_size
        self.max_iter = max_iter
        self.tol = tol
        self.epsilon_scale = epsilon_scale
        self.large_chunk_de1_pct = large_chunk_de1_pct
        self.large_chunk_de2_pct = large_chunk_de2_pct
        self.small_chunk_de1_pct = small_chunk_de1_pct
        self.small_cluster_cutoff = small_cluster_cutoff
        self.candidate_count = candidate_count
        self.flag_threshold = flag_threshold
        self.store_threshold = store_threshold
        self.compression_step_pct = compression_step_pct
        self.compression_max_pct = compression_max_pct
        self.compression_small_cutoff = compression_small_cutoff
        self.auto_compress_trigger = auto_compress_trigger
        self.random_state = random_state

    @classmethod
    def from_config(cls, config, random_state=None):
        """Build an estimator from a :class:`RunConfig`."""
        return cls(
            k_per_chunk=config.k_per_chunk,
            chunk_size=config.stream.chunk_size,
            max_iter=config.em.max_iter,
            tol=config.em.tol,
            epsilon_scale=config.em.epsilon_scale,
            large_chunk_de1_pct=config.merge.large_chunk_de1_pct,
            large_chunk_de2_pct=config.merge.large_chunk_de2_pct,
            small_chunk_de1_pct=config.merge.small_chunk_de1_pct,
            small_cluster_cutoff=config.merge.small_cluster_cutoff,
            candidate_count=config.merge.candidate_count,
            flag_threshold=config.anomaly.flag_threshold,
            store_threshold=config.anomaly.store_threshold,
            compression_step_pct=config.compression.step_pct,
            compression_max_pct=config.compression.max_pct,
            compression_small_cutoff=config.compression.small_cluster_cutoff,
            auto_compress_trigger=config.auto_compress_trigger,
            random_state=config.stream.rng_seed if random_state is None else random_state,
        )

    def to_config(self):
        return RunConfig(
            em=EmConfig(self.max_iter, self.tol, self.epsilon_scale),
            merge=self._thresholds(),
            compression=self._schedule(None),
            anomaly=self._anomaly_config(),
            stream=StreamSpec(chunk_size=self.chunk_size,
                              rng_seed=0 if self.random_state is None else int(self.random_state)),
            k_per_chunk=self.k_per_chunk,
            auto_compress_trigger=self.auto_compress_trigger,
        )

    def _thresholds(self):
        return MergeThresholds(self.large_chunk_de1_pct, self.large_chunk_de2_pct, self.small_chunk_de1_pct,
                               self.small_cluster_cutoff, self.candidate_count)

    def _anomaly_config(self):
        return AnomalyConfig(self.flag_threshold, self.store_threshold)

    def _schedule(self, target_k):
        return CompressionSchedule(step_pct=self.compression_step_pct, max_pct=self.compression_max_pct,
                                   target_k=target_k, candidate_count=self.candidate_count,
                                   small_cluster_cutoff=self.compression_small_cutoff)

    def _reset(self):
        for attr in ("sketch_", "merge_log_", "n_chunks_", "n_iter_", "seed_", "n_features_in_", "labels_"):
            if hasattr(self, attr):
                delattr(self, attr)

    def partial_fit(self, X, y=None):
        """Process one chunk of the stream.

        Parameters
        ----------
        X : array-like of shape (n_samples, n_features)
        y : ignored

        Returns
        -------
        self
        """
        first = not hasattr(self, "sketch_")
        points = validate_input(self, X, reset=first)
        if first:
            self.seed_ = (int(np.random.SeedSequence().entropy % (2 ** 63))
                          if self.random_state is None else int(self.random_state))
            self.n_iter_ = 0

        chunk_index = self.sketch_.chunks_processed if hasattr(self, "sketch_") else 0
        chunk = DataChunk(points, chunk_index)
        em = EmConfig(self.max_iter, self.tol, self.epsilon_scale)
        clustering = fit_chunk(chunk, self.k_per_chunk, em, np.random.default_rng([self.seed_, chunk_index]))
        self.n_iter_ = max(self.n_iter_, clustering.iterations_used)
        anomaly_config = self._anomaly_config()

        if not hasattr(self, "sketch_"):
            snapshot = self.to_config().to_dict()
            snapshot["stream"]["rng_seed"] = self.seed_
            self.sketch_ = init_from_first_chunk(clustering, points, anomaly_config, snapshot)
            self.merge_log_ = []
        else:
            decisions = apply_chunk(self.sketch_, clustering, self._thresholds())
            self.merge_log_.extend(decisions)
            rescore_anomalies(self.sketch_, chunk_index)
            flag_chunk_anomalies(points, clustering, self.sketch_, decisions, anomaly_config)

        trigger = self.auto_compress_trigger
        if trigger is not None and len(self.sketch_) > trigger:
            self.sketch_, _ = compress(self.sketch_, self._schedule(trigger))
        self.n_chunks_ = self.sketch_.chunks_processed
        return self

    def fit(self, X, y=None):
        """Stream ``X`` in its given row order, ``chunk_size`` rows at a time.

        Shuffle beforehand (see :func:`~gmmstream.harness.make_stream`) to
        simulate random arrival.
        """
        points = check_array(X, dtype=np.float64)
        self._reset()
        for start in range(0, points.shape[0], self.chunk_size):
            self.partial_fit(points[start:start + self.chunk_size])
        self.labels_ = self.predict(points)
        return self

    def fit_stream(self, chunks):
        """Process an iterable of chunks (arrays or :class:`DataChunk`)."""
        self._reset()
        for chunk in chunks:
            self.partial_fit(chunk.points if isinstance(chunk, DataChunk) else chunk)
        return self

    def predict(self, X, sketch=None):
        """Id of the base cluster nearest each row by Mahalanobis distance.

        ``sketch`` overrides the fitted sketch (e.g. a compressed copy).
        """
        check_is_fitted(self, "sketch_")
        return label_by_sketch(validate_input(self, X, reset=False), sketch or self.sketch_)

    def transform(self, X):
        """Mahalanobis distance from each row to every base cluster.

        Columns follow ``sketch_.base_signatures`` order.
        """
        check_is_fitted(self, "sketch_")
        return distance_matrix(validate_input(self, X, reset=False), self.sketch_.base_signatures,
                               self.sketch_.epsilon_scale)

    def compress(self, target_k=None):
        """Compressed copy of the sketch and its merge trace; the fitted sketch is kept."""
        check_is_fitted(self, "sketch_")
        return compress(self.sketch_, self._schedule(target_k))

    @property
    def cluster_ids_(self):
        check_is_fitted(self, "sketch_")
        return np.array(self.sketch_.cluster_ids)
