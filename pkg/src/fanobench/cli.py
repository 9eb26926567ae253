"""Command-line front end wiring the measurement and analysis pipeline.

Subcommands:
    campaign    measure a decoding-time distribution
    fit-pareto  tail exponent of a measured distribution
    analyze     buffer chain: speed factor, P_f curves, occupancy, rate curve
    simulate    event-driven queue run at one operating point
    plan        size a decoder farm from a rate-vs-buffer curve

Exit codes: 0 success, 2 usage or parameter error, 3 missing or corrupt
input, 4 target unattainable or analysis impossible on this data.

Every command writes a ``<output>.manifest.json`` recording the argument
vector, option snapshot, seed, input hashes, tool version, and a timestamp.
Output CSV/JSON files themselves contain no timestamps, so reruns with the
same arguments reproduce them byte for byte.

The FANOBENCH_WORKERS environment variable (or --workers) fans campaign
frames out across processes; shard merging is exact, so the worker count
never changes the measured distribution.
"""

from __future__ import annotations

import argparse
import functools
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__
from .codec import ChannelCondition, CodeSpec
from .dtmc import (
    QueueSpec,
    delta_pmf,
    failure_probability,
    occupancy_stats,
    rate_vs_buffer,
    solve_speed_factor,
    steady_state_from_delta,
    write_pf_curve,
    write_rd_curve,
)
from .errors import (
    InsufficientTailError,
    NonConvergenceError,
    SchemaError,
    UnattainableError,
    WorkbenchError,
)
from .fano import FanoConfig
from .montecarlo import (
    fit_pareto,
    load_distribution,
    merge_distributions,
    run_campaign,
    save_distribution,
)
from .planner import AreaModel, area_reduction, load_rd_curve, plan, save_design
from .queuesim import simulate_queue, save_report


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _probability(text: str) -> float:
    value = float(text)
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1], got {text}")
    return value


def _int_list(text: str) -> List[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text}")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(functools.partial(fh.read, 1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(
    base: Path,
    subcommand: str,
    argv: Sequence[str],
    args: argparse.Namespace,
    inputs: Sequence[Path],
) -> str:
    options = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {
        "tool": "fanobench",
        "version": __version__,
        "subcommand": subcommand,
        "argv": list(argv),
        "options": options,
        "inputs_sha256": {str(p): _sha256(p) for p in inputs if p.exists()},
        "timestamp_utc": datetime.now(timezone.utc).isoformat(),
    }
    path = base.parent / (base.name + ".manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return path.name


def _workers(args: argparse.Namespace) -> int:
    if args.workers is not None:
        return args.workers
    return int(os.environ.get("FANOBENCH_WORKERS", "1"))


def _spec_from_args(args: argparse.Namespace) -> CodeSpec:
    generators = tuple(int(g, 8) for g in args.generators.split(","))
    return CodeSpec(
        rate_num=1,
        rate_den=len(generators),
        constraint_length=args.constraint_length,
        generators=generators,
        info_length=args.info_bits,
        frame_length=args.info_bits + args.constraint_length - 1,
    )


def _cmd_campaign(args: argparse.Namespace, argv: Sequence[str]) -> int:
    spec = _spec_from_args(args)
    condition = ChannelCondition.from_ebn0(args.ebn0, spec)
    config = FanoConfig.for_channel(
        condition, spec, delta=args.delta,
        max_cycles=args.cycle_cap_factor * spec.frame_length,
    )
    workers = _workers(args)
    if workers <= 1:
        dist = run_campaign(
            args.decoder, spec, condition, config, args.frames, args.seed
        )
    else:
        chunk = (args.frames + workers - 1) // workers
        shards = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = []
            offset = 0
            while offset < args.frames:
                count = min(chunk, args.frames - offset)
                futures.append(
                    pool.submit(
                        run_campaign, args.decoder, spec, condition, config,
                        count, args.seed, offset,
                    )
                )
                offset += count
            shards = [f.result() for f in futures]
        dist = functools.reduce(merge_distributions, shards)
    out = Path(args.out)
    manifest = _write_manifest(out, "campaign", argv, args, [])
    save_distribution(
        dist, out,
        extra={
            "manifest": manifest,
            "code": spec.to_json_dict(),
            "seed": args.seed,
            "delta": args.delta,
            "max_cycles": config.max_cycles,
        },
    )
    print(
        f"{args.decoder} at {args.ebn0:g} dB: {dist.samples} frames, "
        f"mean {dist.mean_cycles():.1f} cycles, "
        f"frame error rate {dist.frame_error_rate:.4g}, cap hits {dist.cap_hits}"
    )
    return 0


def _cmd_fit_pareto(args: argparse.Namespace, argv: Sequence[str]) -> int:
    dist = load_distribution(Path(args.ts))
    fit = fit_pareto(dist)
    print(
        f"amplitude={fit.amplitude:.6g} exponent={fit.exponent:.6g} "
        f"window=[{fit.fit_window[0]},{fit.fit_window[1]}] "
        f"residual={fit.residual:.4g} points={fit.n_points}"
    )
    if args.out:
        out = Path(args.out)
        manifest = _write_manifest(
            out, "fit-pareto", argv, args,
            [Path(args.ts), Path(args.ts).with_suffix(".json")],
        )
        doc = {
            "schema": "pareto-fit/1",
            "amplitude": fit.amplitude,
            "exponent": fit.exponent,
            "fit_window": list(fit.fit_window),
            "residual": fit.residual,
            "n_points": fit.n_points,
            "t_min": dist.t_min,
            "manifest": manifest,
        }
        with open(out, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def _parse_mu_grid(text: str) -> List[float]:
    try:
        lo, hi, step = (float(tok) for tok in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected lo:hi:step (geometric step fraction), got {text}"
        )
    if not (lo > 0 and hi >= lo and step > 0):
        raise argparse.ArgumentTypeError(f"bad mu grid {text}")
    grid = [lo]
    while grid[-1] < hi:
        grid.append(min(grid[-1] * (1.0 + step), hi))
    return grid


def _cmd_analyze(args: argparse.Namespace, argv: Sequence[str]) -> int:
    ts_path = Path(args.ts)
    dist = load_distribution(ts_path)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    manifest = _write_manifest(
        prefix, "analyze", argv, args, [ts_path, ts_path.with_suffix(".json")]
    )
    solver_kwargs = dict(
        mu_lo=args.mu_lo, mu_hi=args.mu_hi, resolution=args.resolution
    )
    mu_star = solve_speed_factor(
        dist, args.buffer, args.target_pf, clock_hz=args.clock_hz, **solver_kwargs
    )
    base_meta = {
        "manifest": manifest,
        "buffer_codewords": args.buffer,
        "frame_length": dist.frame_length,
        "decoder_kind": dist.decoder_kind,
        "target_pf": args.target_pf,
        "clock_hz": args.clock_hz,
    }
    summary = dict(base_meta)
    summary.update(
        {
            "schema": "analyze-summary/1",
            "mu_star": mu_star,
            "data_rate_bps": args.clock_hz / mu_star,
        }
    )
    if args.mu_grid:
        rows = []
        for mu in args.mu_grid:
            queue = QueueSpec(
                buffer_codewords=args.buffer,
                frame_length=dist.frame_length,
                speed_factor=mu,
                clock_hz=args.clock_hz,
            )
            delta = delta_pmf(dist, queue)
            steady = steady_state_from_delta(delta, queue)
            pf_model = failure_probability(steady, delta)
            pf_sim = None
            if args.compare_sim:
                pf_sim = simulate_queue(
                    dist, queue, args.sim_codewords, args.seed
                ).failure_probability
            rows.append((mu, pf_model, pf_sim))
        write_pf_curve(Path(str(prefix) + "_pf.csv"), rows, base_meta)
    if args.occupancy:
        queue = QueueSpec(
            buffer_codewords=args.buffer,
            frame_length=dist.frame_length,
            speed_factor=mu_star,
            clock_hz=args.clock_hz,
        )
        delta = delta_pmf(dist, queue)
        steady = steady_state_from_delta(delta, queue)
        stats = occupancy_stats(steady, queue)
        occ_path = Path(str(prefix) + "_occupancy.csv")
        import csv as _csv

        with open(occ_path, "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["bucket", "probability"])
            for i, p in enumerate(stats.bucket_pmf, start=1):
                writer.writerow([i, p])
        occ_meta = dict(base_meta)
        occ_meta.update(
            {
                "schema": "occupancy/1",
                "speed_factor": mu_star,
                "mean_occupancy_pct": stats.mean_pct,
            }
        )
        with open(occ_path.with_suffix(".json"), "w") as fh:
            json.dump(occ_meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        summary["mean_occupancy_pct"] = stats.mean_pct
    if args.rd_buffers:
        curve = rate_vs_buffer(
            dist, args.rd_buffers, args.target_pf,
            clock_hz=args.clock_hz, **solver_kwargs,
        )
        write_rd_curve(Path(str(prefix) + "_rd.csv"), curve, base_meta)
    with open(Path(str(prefix) + "_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"B={args.buffer}: mu*={mu_star:.4g} "
        f"(data rate {args.clock_hz / mu_star:.4g} branches/s at target "
        f"P_f={args.target_pf:g})"
    )
    return 0


def _cmd_simulate(args: argparse.Namespace, argv: Sequence[str]) -> int:
    dist = load_distribution(Path(args.ts))
    queue = QueueSpec(
        buffer_codewords=args.buffer,
        frame_length=dist.frame_length,
        speed_factor=args.mu,
        clock_hz=args.clock_hz,
    )
    report = simulate_queue(dist, queue, args.codewords, args.seed)
    out = Path(args.out)
    manifest = _write_manifest(
        out, "simulate", argv, args,
        [Path(args.ts), Path(args.ts).with_suffix(".json")],
    )
    save_report(
        report, out,
        extra={"manifest": manifest, "queue": queue.to_json_dict(), "seed": args.seed},
    )
    print(
        f"simulated {report.n_total} codewords: P_f={report.failure_probability:.4g} "
        f"({report.n_erased} erased), mean occupancy {report.mean_occupancy_pct:.2f}%"
    )
    return 0


def _cmd_plan(args: argparse.Namespace, argv: Sequence[str]) -> int:
    curve = load_rd_curve(Path(args.rd_curve))
    model = AreaModel(alpha=args.alpha)
    points, best_b = plan(curve, model, args.target)
    comparisons = []
    if args.compare:
        by_b = {p.buffer_codewords: p for p in points}
        if len(args.compare) != 2:
            raise WorkbenchError("--compare needs exactly two buffer sizes")
        b_a, b_b = args.compare
        if b_a not in by_b or b_b not in by_b:
            raise WorkbenchError(
                f"--compare buffers must appear in the curve; have {sorted(by_b)}"
            )
        comparisons.append(
            {
                "b_a": b_a,
                "b_b": b_b,
                "area_excess_pct": area_reduction(by_b[b_a], by_b[b_b]),
            }
        )
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    manifest = _write_manifest(prefix, "plan", argv, args, [Path(args.rd_curve)])
    summary = {
        "manifest": manifest,
        "alpha": args.alpha,
        "t_target": args.target,
        "optimal_buffer_codewords": best_b,
        "comparisons": comparisons,
    }
    save_design(Path(str(prefix) + "_design.csv"), points, summary)
    for p in points:
        print(
            f"B={p.buffer_codewords}: N={p.n_decoders}, area={p.total_area:g}, "
            f"normalized throughput={p.normalized_throughput:.4f}"
        )
    print(f"optimal buffer size: B={best_b}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fanobench",
        description="Sequential-decoding throughput workbench",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("campaign", help="measure a decoding-time distribution")
    p.add_argument("--decoder", choices=("ufa", "bfa"), required=True)
    p.add_argument("--ebn0", type=float, required=True, help="Eb/N0 in dB")
    p.add_argument("--frames", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--info-bits", type=_positive_int, default=200)
    p.add_argument("--constraint-length", type=_positive_int, default=7)
    p.add_argument("--generators", default="133,171,165", help="octal, comma-separated")
    p.add_argument("--delta", type=_positive_float, default=2.0)
    p.add_argument("--cycle-cap-factor", type=_positive_int, default=2000)
    p.add_argument("--workers", type=_positive_int, default=None)
    p.set_defaults(func=_cmd_campaign)

    p = sub.add_parser("fit-pareto", help="fit the decoding-time tail exponent")
    p.add_argument("--ts", required=True, help="distribution CSV from campaign")
    p.add_argument("--out", default=None, help="optional JSON output")
    p.set_defaults(func=_cmd_fit_pareto)

    p = sub.add_parser("analyze", help="buffer chain analysis")
    p.add_argument("--ts", required=True)
    p.add_argument("--buffer", type=_positive_int, required=True)
    p.add_argument("--target-pf", type=_probability, required=True)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--mu-grid", type=_parse_mu_grid, default=None,
                   help="lo:hi:step, geometric; emits a (mu, P_f) curve")
    p.add_argument("--compare-sim", action="store_true",
                   help="add a simulated P_f column to the curve")
    p.add_argument("--sim-codewords", type=_positive_int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--occupancy", action="store_true",
                   help="emit the occupancy distribution at the solved mu")
    p.add_argument("--rd-buffers", type=_int_list, default=None,
                   help="comma-separated buffer sizes for a rate curve")
    p.add_argument("--clock-hz", type=_positive_float, default=1e9)
    p.add_argument("--mu-lo", type=_positive_float, default=1.0)
    p.add_argument("--mu-hi", type=_positive_float, default=100.0)
    p.add_argument("--resolution", type=_positive_float, default=0.01)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("simulate", help="event-driven queue run")
    p.add_argument("--ts", required=True)
    p.add_argument("--buffer", type=_positive_int, required=True)
    p.add_argument("--mu", type=_positive_float, required=True)
    p.add_argument("--codewords", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clock-hz", type=_positive_float, default=1e9)
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("plan", help="size a decoder farm")
    p.add_argument("--rd-curve", required=True, help="rate-vs-buffer CSV")
    p.add_argument("--alpha", type=_positive_float, required=True,
                   help="decoder area in buffer-slot units")
    p.add_argument("--target", type=_positive_float, required=True,
                   help="aggregate throughput target, branches/s")
    p.add_argument("--compare", type=_int_list, default=None,
                   help="two buffer sizes to compare for area")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=_cmd_plan)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except (UnattainableError, InsufficientTailError, NonConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (SchemaError, FileNotFoundError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (WorkbenchError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
