"""Single-pass Gaussian mixture clustering of data streams.

Full-covariance cluster signatures are kept in a bounded sketch, grown by
entropy-guarded merging of per-chunk EM clusters, compressed on demand, and
used to score anomalies by Mahalanobis distance.
"""

from .anomaly import AnomalyConfig, flag_chunk_anomalies, query_anomalies, rescore_anomalies
from .chunk import ChunkClustering, ChunkGaussianMixture, DataChunk, EmConfig, fit_chunk, seed_components
from .compression import CompressionSchedule, CompressionStep, compress, compression_profile
from .config import RunConfig
from .estimator import StreamingGaussianClusterer
from .exceptions import (
    ConfigError,
    DegenerateCovariance,
    DimensionError,
    FormatError,
    GmmStreamError,
    InvalidData,
    NoOpWarning,
    ParseError,
    StateError,
)
from .gaussian import ClusterSignature, entropy, mahalanobis, merge_signatures, regularize
from .harness import (
    Dataset,
    MixtureSpec,
    StreamSpec,
    augment,
    batch_baseline,
    generate_synthetic,
    label_by_sketch,
    load_dataset,
    make_stream,
    rand_index,
)
from .merge import MergeDecision, MergeThresholds, apply_chunk, drift_report, evaluate_merge, nearest_candidates
from .sketch import AnomalyRecord, SketchState, init_from_first_chunk, load, save
from .validation import ValidationRow, run_seed, run_validation

__version__ = "0.1.0"
