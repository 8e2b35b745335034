"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data or configuration error,
3 numerically degenerate covariance.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings

import numpy as np

from . import sketch as sketch_io
from .compression import CompressionSchedule, compress
from .config import RunConfig
from .estimator import StreamingGaussianClusterer
from .exceptions import DegenerateCovariance, GmmStreamError
from .gaussian import entropy, regularize
from .harness import (
    MixtureSpec,
    augment,
    generate_synthetic,
    load_dataset,
    make_stream,
    s1_like,
    unbalance_like,
)
from .anomaly import anomaly_series_rows, query_anomalies
from .merge import drift_report, drift_rows
from .validation import run_validation

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DEGENERATE = 0, 1, 2, 3

_BUILTIN = {"builtin:s1_like": s1_like, "builtin:unbalance_like": unbalance_like}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_dataset(path, seed=0):
    """Load a delimited text file, a mixture JSON (sampled) or a ``builtin:`` stand-in."""
    if path in _BUILTIN:
        return _BUILTIN[path](seed)
    if path.endswith(".json"):
        spec = MixtureSpec.from_file(path)
        return generate_synthetic(spec, seed=spec.seed if spec.seed is not None else seed)
    return load_dataset(path)


def write_table(rows, path, fieldnames=None):
    """Write rows as JSON when ``path`` ends in ``.json``, CSV otherwise."""
    if path.endswith(".json"):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=1)
            fh.write("\n")
        return
    fieldnames = fieldnames or (list(rows[0]) if rows else [])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def ellipse_rows(signatures, epsilon_scale, radius=3.0, n_vertices=64, dims=(0, 1)):
    """Vertices of each cluster's Mahalanobis contour in a 2-D projection.

    The contour of the marginal Gaussian on ``dims`` at distance ``radius``.
    """
    i, j = dims
    angles = np.linspace(0.0, 2 * np.pi, n_vertices, endpoint=False)
    circle = np.stack([np.cos(angles), np.sin(angles)])
    rows = []
    for sig in signatures:
        cov = regularize(sig.covariance, epsilon_scale)[np.ix_([i, j], [i, j])]
        vals, vecs = np.linalg.eigh(cov)
        pts = sig.mean[[i, j], None] + radius * (vecs * np.sqrt(np.maximum(vals, 0))) @ circle
        for v in range(n_vertices):
            rows.append({"cluster_id": sig.id, "vertex": v, "x": float(pts[0, v]), "y": float(pts[1, v])})
    return rows


def _config(args):
    config = RunConfig.load(args.config)
    if getattr(args, "seed", None) is not None:
        config.stream.rng_seed = args.seed
    return config


def cmd_run(args):
    config = _config(args)
    ds = read_dataset(args.dataset, config.stream.rng_seed)
    aug = augment(ds, config.stream.augmentation_copies)
    est = StreamingGaussianClusterer.from_config(config)
    est.fit_stream(make_stream(aug, config.stream))
    sk = est.sketch_
    if args.sketch:
        sketch_io.save(sk, args.sketch)
    summary = {
        "dataset": ds.name,
        "points_streamed": len(aug),
        "chunks": sk.chunks_processed,
        "base_clusters": len(sk),
        "anomalies": len(sk.anomalies),
        "merged_chunk_clusters": sum(d.chosen_base_id is not None for d in est.merge_log_),
        "appended_chunk_clusters": sum(d.chosen_base_id is None for d in est.merge_log_),
        "sketch": args.sketch,
    }
    if args.out:
        write_table([d.as_row() for d in est.merge_log_], args.out)
    print(json.dumps(summary, indent=1))
    return EXIT_OK


def _load_sketch(args):
    if not args.sketch:
        raise GmmStreamError("--sketch is required")
    return sketch_io.load(args.sketch)


def cmd_query_clusters(args):
    sk = _load_sketch(args)
    trace = []
    if args.k is not None:
        if args.config:
            section = RunConfig.load(args.config).to_dict()["compression"]
        else:
            # the schedule recorded when the sketch was built
            section = RunConfig.from_dict({"compression": sk.config_snapshot.get("compression", {})}
                                          ).to_dict()["compression"]
        schedule = CompressionSchedule(**{**section, "target_k": args.k})
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            sk, trace = compress(sk, schedule)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        if args.save_compressed:
            sketch_io.save(sk, args.save_compressed)
    eps = sk.epsilon_scale
    report = {
        "clusters": len(sk),
        "total_points": sk.total_points,
        "merges": [step.as_row() for step in trace],
        "signatures": [
            {
                "id": sig.id,
                "num_points": sig.num_points,
                "mean": sig.mean.tolist(),
                "covariance": sig.covariance.tolist(),
                "entropy_bits": entropy(regularize(sig.covariance, eps)),
                "created_at_chunk": sig.created_at_chunk,
            }
            for sig in sk.base_signatures
        ],
    }
    print(json.dumps(report, indent=1))
    if args.out:
        if sk.dimensionality < 2:
            print("warning: ellipse export needs at least two dimensions; skipped", file=sys.stderr)
        else:
            write_table(ellipse_rows(sk.base_signatures, eps, radius=args.radius, dims=tuple(args.dims)),
                        args.out)
    return EXIT_OK


def cmd_anomalies(args):
    sk = _load_sketch(args)
    rows = query_anomalies(sk, args.min_score)
    print(json.dumps({"anomalies": len(rows), "records": rows}, indent=1))
    if args.out:
        series = anomaly_series_rows(sk, [r["anomaly_id"] for r in rows])
        write_table(series, args.out,
                    ["anomaly_id", "axis_type", "axis_value", "score", "nearest_cluster"])
    return EXIT_OK


def cmd_drift(args):
    sk = _load_sketch(args)
    report = drift_report(sk)
    summary = [
        {"cluster_id": cid, "created_at_chunk": e["created_at_chunk"], "num_points": int(e["trajectory"][-1])}
        for cid, e in report.items()
    ]
    print(json.dumps({"chunks": sk.chunks_processed, "clusters": summary}, indent=1))
    if args.out:
        write_table(drift_rows(sk), args.out,
                    ["cluster_id", "created_at_chunk", "chunk_index", "points_added", "cumulative_points"])
    return EXIT_OK


def cmd_validate(args):
    config = _config(args)
    ds = read_dataset(args.dataset, config.stream.rng_seed)
    rows, median = run_validation(ds, config, seeds=args.seeds, target_k=args.k,
                                  baseline_k=args.baseline_k, workers=args.workers)
    table = [r.as_row() for r in rows]
    for r in table:
        truth = "" if r["rand_index_truth"] is None else f"  vs labels {r['rand_index_truth']:.4f}"
        print(f"seed {r['seed']}: rand {r['rand_index']:.4f}{truth}  "
              f"base {r['base_clusters']} -> {r['final_clusters']}  {r['runtime_s']:.1f}s")
    print(f"median rand index: {median:.4f}")
    if args.out:
        write_table(table, args.out)
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--sketch", metavar="PATH", help="sketch file to write (run) or read")
    common.add_argument("--out", metavar="PATH", help="long-format export (.csv or .json)")

    parser = _Parser(prog="gmmstream", description="Single-pass Gaussian mixture stream clustering.")
    parser.add_argument("--print-config", action="store_true",
                        help="print the resolved configuration (defaults merged with --config) and exit")
    parser.add_argument("--config", metavar="PATH", dest="top_config", help=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("run", parents=[common], help="stream a dataset into a sketch")
    p.add_argument("dataset", help="text file, mixture .json, or builtin:s1_like / builtin:unbalance_like")
    p.add_argument("--seed", type=int, help="override stream.rng_seed")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("query-clusters", parents=[common], help="list (optionally compressed) clusters")
    p.add_argument("--k", type=int, help="compress to this many clusters first")
    p.add_argument("--save-compressed", metavar="PATH", help="write the compressed sketch")
    p.add_argument("--radius", type=float, default=3.0, help="Mahalanobis radius of exported contours")
    p.add_argument("--dims", type=int, nargs=2, default=[0, 1], help="coordinates of the contour plane")
    p.set_defaults(func=cmd_query_clusters)

    p = sub.add_parser("anomalies", parents=[common], help="report stored anomalies")
    p.add_argument("--min-score", type=float, default=0.0, help="minimum current score")
    p.set_defaults(func=cmd_anomalies)

    p = sub.add_parser("drift", parents=[common], help="export per-cluster growth trajectories")
    p.set_defaults(func=cmd_drift)

    p = sub.add_parser("validate", parents=[common], help="Rand index of stream vs batch EM over seeds")
    p.add_argument("dataset")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--k", type=int, default=15, help="compress the stream sketch to this many clusters")
    p.add_argument("--baseline-k", type=int, help="batch EM components (default: --k)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.print_config:
            path = args.top_config or getattr(args, "config", None)
            sys.stdout.write(RunConfig.load(path).dumps())
            return EXIT_OK
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except DegenerateCovariance as exc:
        print(f"gmmstream: degenerate covariance: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (GmmStreamError, OSError) as exc:
        print(f"gmmstream: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
