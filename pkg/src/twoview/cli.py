"""Command-line interface: estimate, synth, and bench subcommands."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench, metrics
from .engine import EngineConfig, run_estimation
from .errors import NapsacStarved, NoModelFound, TwoviewError
from .geometry import ModelKind

_KINDS = {"h": ModelKind.HOMOGRAPHY, "f": ModelKind.FUNDAMENTAL}


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _add_engine_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scorer", default="magsac++",
                   choices=["magsac++", "ransac", "msac", "lmeds"])
    p.add_argument("--sampler", default="pnapsac",
                   choices=["uniform", "prosac", "napsac", "pnapsac"])
    p.add_argument("--sigma-max", type=float, default=None,
                   help="maximum noise scale in pixels")
    p.add_argument("--threshold", type=float, default=None,
                   help="inlier threshold in pixels (implies sigma-max)")
    p.add_argument("--confidence", type=float, default=0.99)
    p.add_argument("--gamma", type=float, default=None,
                   help="termination relaxation (default 0.1 for localized samplers)")
    p.add_argument("--max-iterations", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)


def _engine_params(args) -> dict:
    return dict(sigma_max=args.sigma_max, threshold=args.threshold,
                confidence=args.confidence, gamma=args.gamma,
                max_iterations=args.max_iterations)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twoview",
                                     description="Robust two-view model estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate a model from an instance file")
    est.add_argument("file", type=Path)
    est.add_argument("--model", required=True, choices=["h", "f"])
    _add_engine_args(est)

    syn = sub.add_parser("synth", help="generate a synthetic instance with ground truth")
    syn.add_argument("--kind", required=True, choices=["h", "f"])
    syn.add_argument("--n", type=int, required=True)
    syn.add_argument("--inlier-ratio", type=float, required=True)
    syn.add_argument("--noise", type=float, required=True)
    syn.add_argument("--layout", default="global", choices=["global", "localized"])
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--width", type=float, default=1000.0)
    syn.add_argument("--height", type=float, default=1000.0)
    syn.add_argument("--out", type=Path, required=True)

    ben = sub.add_parser("bench", help="run a method matrix over an instance directory")
    ben.add_argument("--dir", type=Path, required=True)
    ben.add_argument("--methods", required=True,
                     help="comma list of scorer:sampler pairs")
    ben.add_argument("--repeats", type=int, default=100)
    ben.add_argument("--out-prefix", required=True)
    ben.add_argument("--model", default=None, choices=["h", "f"],
                     help="model kind for instances without a ground-truth section")
    _add_engine_args(ben)
    return parser


def _cmd_estimate(args) -> int:
    inst = bench.parse_instance(args.file)
    config = EngineConfig(kind=_KINDS[args.model], scorer=args.scorer,
                          sampler=args.sampler, seed=args.seed,
                          **_engine_params(args))
    report = run_estimation(inst.points, config, inst.image_sizes)
    print(f"model kind: {config.kind.value}")
    for row in report.model.M:
        print("  " + " ".join(_fmt(v) for v in row))
    print(f"quality: {_fmt(report.quality)}")
    n_in = int(report.inlier_mask.sum())
    print(f"inliers: {n_in}/{inst.n_points} (ratio {_fmt(report.inlier_ratio)})")
    print(f"iterations: {report.iterations} "
          f"(degenerate samples: {report.degenerate_samples})")
    print(f"wall time: {_fmt(report.wall_time_ms)} ms")
    if report.low_confidence:
        print("warning: low-confidence result (inlier ratio < 0.1)")
    if inst.gt is not None:
        try:
            err = bench.evaluate_error(report.model, inst)
            fail = metrics.is_failure(err, inst.image_sizes)
            print(f"ground-truth error: {_fmt(err)} px (failure: {fail})")
        except TwoviewError:
            pass
    return 0


def _cmd_synth(args) -> int:
    inst = bench.generate_synthetic(
        kind=_KINDS[args.kind], n_points=args.n, inlier_ratio=args.inlier_ratio,
        noise_sigma=args.noise, layout=args.layout, seed=args.seed,
        image_sizes=(args.width, args.height, args.width, args.height))
    bench.write_instance(inst, args.out)
    print(f"wrote {inst.n_points} correspondences to {args.out}")
    return 0


def _cmd_bench(args) -> int:
    files = sorted(args.dir.glob("*.txt"))
    if not files:
        print(f"no *.txt instances under {args.dir}", file=sys.stderr)
        return 2
    instances = [bench.parse_instance(f) for f in files]
    methods = bench.parse_methods(args.methods)
    kind = _KINDS[args.model] if args.model else None
    records = bench.run_benchmark(instances, methods, repeats=args.repeats,
                                  master_seed=args.seed, kind=kind,
                                  **_engine_params(args))
    prefix = args.out_prefix
    bench.write_records_csv(records, f"{prefix}_records.csv")
    bench.write_timing_csv(records, f"{prefix}_timing.csv")
    bench.write_cdf_csv(records, f"{prefix}_cdf.csv")
    summaries = bench.summarize(records)
    bench.write_summary_csv(summaries, f"{prefix}_summary.csv")
    text = bench.format_summary_text(summaries)
    Path(f"{prefix}_summary.txt").write_text(text)
    print(text, end="")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "estimate":
            return _cmd_estimate(args)
        if args.command == "synth":
            return _cmd_synth(args)
        return _cmd_bench(args)
    except (NoModelFound, NapsacStarved) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TwoviewError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
