"""Command-line entry point: ``python3 -m coinfer <subcommand> ...``.

Exit status: 0 success, 1 infeasible plan, 2 input error, 3 internal error.
Every subcommand reads files and writes only to its --out / --out-dir.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import fixtures
from .bandwidth import clamp_trace, extract_states, load_state_traces, load_trace, rescale_trace
from .changepoint import DetectorConfig, detect_changes
from .config_map import build_map, load_map, write_map
from .errors import CoinferError
from .latency_model import (
    default_ground_truth,
    fit,
    generate_synthetic_profiles,
    ground_truth_from_dict,
    load_predictor,
    load_profiles,
    write_predictor,
    write_profiles,
)
from .model_graph import load_model
from .simulator import (
    MODES,
    ReplayConfig,
    accuracy_vs_deadline,
    bandwidth_sweep,
    compare,
    deadline_sweep,
    load_report,
    replay,
    write_report,
    write_rows,
)
from .static_planner import plan_static

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3


class InputError(Exception):
    """Bad flag combination or value discovered after argument parsing."""


def _floats(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _positive_int(text: str) -> int:
    v = _positive(text)
    if v != int(v):
        raise argparse.ArgumentTypeError(f"must be an integer, got {text}")
    return int(v)


def _dump_json(obj, path: Path | None) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def _model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", type=Path, default=fixtures.ALEXNET_MODEL,
                   help="branchy model JSON (default: bundled alexnet fixture)")
    p.add_argument("--predictor", type=Path, default=fixtures.ALEXNET_PREDICTOR,
                   help="fitted predictor JSON (default: bundled alexnet predictor)")


def _trace_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trace", type=Path, required=True, help="bandwidth trace CSV")
    p.add_argument("--trace-format", choices=("canonical", "belgium"), default="canonical",
                   help="canonical: timestamp_ms,bandwidth_kbps; belgium: timestamp_ms,bytes,interval_ms")
    p.add_argument("--rescale", type=_positive, nargs=2, metavar=("LO", "HI"),
                   help="min-max map the trace onto [LO, HI] kbps")
    p.add_argument("--clamp", type=_positive, nargs=2, metavar=("LO", "HI"),
                   help="clip the trace to [LO, HI] kbps")


def _load_trace(args):
    trace = load_trace(args.trace, format=args.trace_format)
    for flag, fn in (("rescale", rescale_trace), ("clamp", clamp_trace)):
        bounds = getattr(args, flag)
        if bounds:
            if not bounds[0] < bounds[1]:
                raise InputError(f"--{flag}: LO must be below HI")
            trace = fn(trace, *bounds)
    return trace


# -- subcommands ------------------------------------------------------------


def cmd_gen_profiles(args) -> int:
    truth = default_ground_truth()
    if args.truth is not None:
        truth = ground_truth_from_dict(json.loads(args.truth.read_text()))
    records = generate_synthetic_profiles(truth, n=args.n, noise_sd=args.noise_sd, seed=args.seed)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_profiles(records, args.out)
    return EXIT_OK


def cmd_fit(args) -> int:
    predictor = fit(load_profiles(args.profiles))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_predictor(predictor, args.out)
    for kind, side in predictor.skipped:
        print(f"warning: too few samples for ({kind.value}, {side.value}); skipped", file=sys.stderr)
    return EXIT_OK


def cmd_plan(args) -> int:
    model, predictor = load_model(args.model), load_predictor(args.predictor)
    plan = plan_static(model, predictor, args.bandwidth_kbps, args.latency_ms)
    if plan is None:
        print("infeasible")
        if args.out is not None:
            _dump_json({"feasible": False}, args.out)
        return EXIT_INFEASIBLE
    _dump_json(plan.to_dict(), None)
    if args.out is not None:
        _dump_json(plan.to_dict(), args.out)
    return EXIT_OK


def cmd_build_map(args) -> int:
    if args.states is not None:
        states = args.states
    else:
        states = extract_states(load_state_traces(args.oboe_dir))
    cmap = build_map(load_model(args.model), load_predictor(args.predictor), states, args.latency_ms)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_map(cmap, args.out)
    infeasible = sum(not e.feasible for e in cmap)
    if infeasible:
        print(f"warning: {infeasible} of {len(cmap)} states cannot meet the deadline", file=sys.stderr)
    return EXIT_OK


def cmd_detect(args) -> int:
    trace = _load_trace(args)
    obs = detect_changes(trace.bandwidth_kbps, DetectorConfig(hazard_lambda=args.hazard_lambda))
    rows = [
        {"timestamp_ms": t, "sample_kbps": x, "changed": o.changed,
         "state_kbps": o.current_state_kbps, "map_run_length": o.map_run_length}
        for t, x, o in zip(trace.timestamps_ms, trace.bandwidth_kbps, obs)
    ]
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_rows(rows, args.out, ("timestamp_ms", "sample_kbps", "state_kbps", "changed", "map_run_length"))
    return EXIT_OK


def cmd_simulate(args) -> int:
    if (args.mode == "dynamic") != (args.map is not None):
        raise InputError("--map is required with --mode dynamic and not accepted otherwise")
    cfg = ReplayConfig(
        mode=args.mode,
        latency_requirement_ms=args.latency_ms,
        trace=_load_trace(args),
        model=load_model(args.model),
        predictor=load_predictor(args.predictor),
        map=load_map(args.map) if args.map is not None else None,
        measurement_interval_ms=args.interval_ms,
        detector_config=DetectorConfig(hazard_lambda=args.hazard_lambda),
    )
    write_report(replay(cfg), args.out_dir)
    return EXIT_OK


def _report_from_summary(path: Path):
    meta = json.loads(path.read_text())
    if not isinstance(meta, dict) or "mode" not in meta:
        raise InputError(f"{path}: not a replay summary")
    return load_report(path.parent, meta["mode"])


def cmd_compare(args) -> int:
    cmp = compare(_report_from_summary(args.a), _report_from_summary(args.b))
    args.out.mkdir(parents=True, exist_ok=True)
    _dump_json(cmp.summary(), args.out / "comparison.json")
    rows = cmp.rows()
    write_rows(rows, args.out / "comparison_cdf.csv", tuple(rows[0]))
    return EXIT_OK


def cmd_sweep(args) -> int:
    model, predictor = load_model(args.model), load_predictor(args.predictor)
    if args.kind == "bandwidth":
        if args.latency_ms is None or args.bandwidths is None:
            raise InputError("bandwidth sweep needs --latency-ms and --bandwidths")
        rows = [vars(r) for r in bandwidth_sweep(model, predictor, sorted(args.bandwidths), args.latency_ms)]
    else:
        if args.bandwidth_kbps is None or args.deadlines is None:
            raise InputError(f"{args.kind} sweep needs --bandwidth-kbps and --deadlines")
        deadlines = sorted(args.deadlines)
        if args.kind == "deadline":
            rows = [vars(r) for r in deadline_sweep(model, predictor, args.bandwidth_kbps, deadlines)]
        else:
            rows = [
                {**vars(r), "signed_accuracy": r.signed_accuracy}
                for r in accuracy_vs_deadline(model, predictor, args.bandwidth_kbps, deadlines)
            ]
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_rows(rows, args.out, tuple(rows[0]))
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coinfer",
        description="Device-edge co-inference planning and bandwidth-trace replay.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("gen-profiles", help="write synthetic layer profiles (CSV)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-sd", type=float, default=0.0, help="Gaussian latency noise, ms")
    p.add_argument("--n", type=_positive_int, default=100, help="samples per (kind, side)")
    p.add_argument("--truth", type=Path, help="ground-truth coefficients in predictor JSON layout")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_gen_profiles)

    p = sub.add_parser("fit", help="fit per-(kind, side) latency regressions")
    p.add_argument("--profiles", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="predictor JSON")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("plan", help="most accurate (exit, partition) meeting a deadline")
    _model_args(p)
    p.add_argument("--bandwidth-kbps", type=_positive, required=True)
    p.add_argument("--latency-ms", type=_positive, required=True)
    p.add_argument("--out", type=Path, help="also write the plan JSON here")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("build-map", help="bandwidth-state -> strategy map (JSON)")
    _model_args(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--states", type=_floats, help="comma-separated states, kbps")
    src.add_argument("--oboe-dir", type=Path, help="directory of chunk-level state traces")
    p.add_argument("--latency-ms", type=_positive, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_build_map)

    p = sub.add_parser("detect", help="run changepoint detection over a trace")
    _trace_args(p)
    p.add_argument("--lambda", dest="hazard_lambda", type=_positive, default=100.0,
                   help="expected segment length in samples (hazard 1/lambda)")
    p.add_argument("--out", type=Path, required=True, help="per-sample CSV")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("simulate", help="replay a trace in one planner mode")
    p.add_argument("--mode", choices=MODES, required=True)
    _model_args(p)
    _trace_args(p)
    p.add_argument("--map", type=Path, help="configuration map JSON (dynamic mode only)")
    p.add_argument("--latency-ms", type=_positive, required=True)
    p.add_argument("--interval-ms", type=_positive_int, default=1000)
    p.add_argument("--lambda", dest="hazard_lambda", type=_positive, default=100.0)
    p.add_argument("--out-dir", type=Path, required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="compare two replays by their summary JSON files")
    p.add_argument("--a", type=Path, required=True)
    p.add_argument("--b", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="static-planner sweeps over bandwidth or deadline")
    p.add_argument("--kind", choices=("bandwidth", "deadline", "baselines"), required=True,
                   help="baselines: accuracy per deadline for the joint planner and the three baselines")
    _model_args(p)
    p.add_argument("--bandwidths", type=_floats, help="comma-separated kbps (bandwidth sweep)")
    p.add_argument("--latency-ms", type=_positive, help="fixed deadline (bandwidth sweep)")
    p.add_argument("--deadlines", type=_floats, help="comma-separated ms (deadline/baselines sweep)")
    p.add_argument("--bandwidth-kbps", type=_positive, help="fixed bandwidth (deadline/baselines sweep)")
    p.add_argument("--out", type=Path, required=True, help="CSV table")
    p.set_defaults(func=cmd_sweep)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, CoinferError, OSError, ValueError, KeyError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())
