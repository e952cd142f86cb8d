"""Benchmark harness for lowered convolution: verification, strategy selection, sweeps, device splits.

Exit codes: 0 on success, 1 when a verification fails, 2 on configuration
errors (bad flags, unreadable or malformed layer/device files).
"""
import argparse
import logging
import math
import os
import sys

import numpy as np

from ._validation import ConfigurationError
from .batching import plan_partitions
from .bench import (
    model_vs_measured,
    random_instance,
    time_partitioned,
    time_per_image,
    time_strategy,
    verify_layer,
)
from .cost import calibrate_weights, crossover_ratio, estimate, select_strategy, with_measured_efficiency
from .gemm import GemmConfig, MAX_THREADS, gemm_throughput_probe
from .layerfile import load_layers
from .lowering import Strategy
from .records import ResultRecord, dump, machine_descriptor
from .scheduler import (
    DeviceProfile,
    format_device_profiles,
    gap_audit,
    heuristic_gap,
    load_device_profiles,
    makespan_curve,
    optimal_split_sweep,
    proportional_split,
    simulate_makespan,
)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG_ERROR = 2
DEFAULT_SEED = 20150601

log = logging.getLogger("convlower")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigurationError(message)


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from None


def _partition_list(text):
    items = []
    for v in text.split(","):
        v = v.strip().lower()
        if not v:
            continue
        if v == "none":
            items.append(None)
            continue
        try:
            items.append(int(v))
        except ValueError:
            raise argparse.ArgumentTypeError(f"partition entries must be integers or 'none', got {v!r}") from None
    return items


def _number(text):
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _ratio_range(text):
    try:
        lo, hi, steps = text.split(":")
        lo, hi, steps = _number(lo), _number(hi), int(steps)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI:STEPS, got {text!r}") from None
    if lo <= 0 or hi < lo or steps < 1:
        raise argparse.ArgumentTypeError(f"need 0 < LO <= HI and STEPS >= 1, got {text!r}")
    return lo, hi, steps


def _threads(text):
    value = int(text)
    if not 1 <= value <= MAX_THREADS:
        raise argparse.ArgumentTypeError(f"threads must be in [1, {MAX_THREADS}]")
    return value


def _strategies(value, layer=None, weights=None):
    if value == "all":
        return list(Strategy)
    if value == "auto":
        return [select_strategy(layer, weights).strategy]
    return [Strategy.parse(value)]


def _pick_layer(args):
    layers = load_layers(args.layers)
    if args.layer is None:
        return next(iter(layers.items()))
    if args.layer not in layers:
        raise ConfigurationError(f"layer {args.layer!r} not found; known layers: {', '.join(layers)}")
    return args.layer, layers[args.layer]


def _record(args, **kwargs):
    return ResultRecord(command=args.command, seed=args.seed, machine=machine_descriptor(), **kwargs)


def _timed_record(args, name, layer, strategy, summary, **kwargs):
    rec = _record(args, strategy=strategy.label, threads=args.threads, **kwargs).set_layer(name, layer)
    rec.set_timing(summary["lower"], summary["multiply"], summary["lift"], summary.get("wall", summary["total"]))
    rec.set_estimate(estimate(strategy, layer))
    return rec


def cmd_verify(args):
    layers = load_layers(args.layers)
    rng = np.random.default_rng(args.seed)
    records, failed = [], False
    for name, layer in layers.items():
        strategies = _strategies(args.strategy, layer)
        for strategy, err, passed in verify_layer(layer, rng, strategies, args.tolerance, args.threads):
            failed |= not passed
            rec = _record(args, strategy=strategy.label, threads=args.threads, max_rel_error=err,
                          tolerance=args.tolerance, passed=passed).set_layer(name, layer)
            records.append(rec)
            log.info("%s %s rel.err=%.3g %s", name, strategy.label, err, "ok" if passed else "FAIL")
    return records, (EXIT_VERIFY_FAILED if failed else EXIT_OK)


def cmd_select(args):
    layers = load_layers(args.layers)
    weights = calibrate_weights(threads=args.threads) if args.calibrate else None
    records = []
    for name, layer in layers.items():
        choice = select_strategy(layer, weights)
        for strategy, est in choice.estimates.items():
            rec = _record(args, strategy=strategy.label, model_winner=choice.strategy.label,
                          footprint_bytes=est.lowered_bytes).set_layer(name, layer)
            records.append(rec.set_estimate(est))
    return records, EXIT_OK


def _ratio_points(lo, hi, steps):
    if steps == 1:
        return [lo]
    return list(np.geomspace(lo, hi, steps))


def cmd_sweep_ratio(args):
    name, template = _pick_layer(args)
    lo, hi, steps = args.ratio_range
    product = template.d * template.o
    rng = np.random.default_rng(args.seed)
    base = calibrate_weights(threads=args.threads)
    crossing = crossover_ratio(template, base)
    records = []
    for ratio in _ratio_points(lo, hi, steps):
        d = max(1, round(math.sqrt(product * ratio)))
        o = max(1, round(math.sqrt(product / ratio)))
        layer = template.with_channels(d, o)
        weights = with_measured_efficiency(base, layer, args.threads) if args.probe_efficiency else base
        model, measured, choice, timings = model_vs_measured(
            layer, weights, rng, strategies=tuple(Strategy), threads=args.threads, reps=args.reps
        )
        for strategy in Strategy:
            rec = _timed_record(args, name, layer, strategy, timings[strategy], p=1,
                                model_winner=model.label, measured_winner=measured.label,
                                note=f"model_crossover_type1_type3={crossing}")
            rec.set_estimate(choice.estimates[strategy])
            rec.throughput = layer.b / timings[strategy]["total"].median
            records.append(rec)
    return records, EXIT_OK


def cmd_sweep_batch(args):
    name, layer = _pick_layer(args)
    rng = np.random.default_rng(args.seed)
    records = []
    for b in args.batch:
        sized = layer.with_batch(b)
        X, W = random_instance(sized, rng)
        for strategy in _strategies(args.strategy, sized):
            summary = time_strategy(X, W, strategy, threads=args.threads, reps=args.reps)
            rec = _timed_record(args, name, sized, strategy, summary, p=1)
            rec.throughput = b / summary["total"].median
            rec.note = f"gemm_flops_per_s={rec.est_gemm_flops / summary['multiply'].median!r}"
            records.append(rec)
    return records, EXIT_OK


def cmd_sweep_partitions(args):
    name, layer = _pick_layer(args)
    b = args.batch[0]
    sized = layer.with_batch(b)
    rng = np.random.default_rng(args.seed)
    X, W = random_instance(sized, rng)
    records = []
    for strategy in _strategies(args.strategy, sized):
        for p in args.partitions:
            if p is None:
                summary, report = time_per_image(X, W, strategy, args.threads, reps=args.reps)
                note = "per-image baseline: one image at a time, all threads in GEMM"
            else:
                try:
                    plan = plan_partitions(b, args.threads, p)
                except ConfigurationError as exc:
                    log.warning("skipping p=%s: %s", p, exc)
                    continue
                summary, report = time_partitioned(X, W, strategy, plan, reps=args.reps)
                note = f"partition_sizes={list(plan.partition_sizes)} threads={list(plan.threads_per_partition)}"
            rec = _timed_record(args, name, sized, strategy, summary, p=p, note=note)
            rec.throughput = b / summary["wall"].median
            rec.footprint_bytes = report.peak_bytes
            records.append(rec)
    return records, EXIT_OK


def cmd_schedule(args):
    name, layer = _pick_layer(args)
    devices = load_device_profiles(args.devices)
    strategy = Strategy.parse(args.strategy) if args.strategy not in ("auto", "all") else Strategy.TYPE1
    records = []

    def add(**kwargs):
        rec = _record(args, strategy=strategy.label, **kwargs).set_layer(name, layer)
        records.append(rec)
        return rec

    proportional = proportional_split(devices, layer.b)
    heur = simulate_makespan(layer, proportional, devices, strategy)
    for dev, frac, count in zip(devices, proportional.fractions, proportional.counts):
        add(device=dev.name, fraction=frac, makespan=heur, note=f"proportional images={count}")

    if len(devices) == 1:
        add(gap=1.0, makespan=heur, note="single device: degenerate curve")
        add(device=devices[0].name, fraction=1.0, makespan=heur, note="curve")
        return records, EXIT_OK
    if len(devices) > 2:
        raise ConfigurationError(f"split sweeps support exactly 2 devices, got {len(devices)}")

    best = optimal_split_sweep(layer, devices, args.granularity, strategy)
    best_span = simulate_makespan(layer, best, devices, strategy)
    for dev, frac, count in zip(devices, best.fractions, best.counts):
        add(device=dev.name, fraction=frac, makespan=best_span, note=f"sweep-optimum images={count}")
    add(gap=heuristic_gap(layer, devices, args.granularity, strategy), makespan=heur, note="heuristic/optimum")
    for p, span in makespan_curve(layer, devices, args.granularity, strategy):
        add(device=devices[1].name, fraction=p, makespan=span, note="curve")
    if args.audit:
        gaps = gap_audit(layer, args.audit, 0.05, args.granularity, args.seed, strategy)
        worst = max(gaps)
        add(gap=worst, passed=worst <= 1.05, tolerance=1.05,
            note=f"audit: {args.audit} random pairs, overheads <= 5% of balanced work time")
    return records, EXIT_OK


def cmd_profile(args):
    cfg = GemmConfig(threads=args.threads)
    flops = gemm_throughput_probe((args.cube, args.cube, args.cube), cfg, reps=args.reps, seed=args.seed)
    device = DeviceProfile(args.name, flops, 0.0)
    text = format_device_profiles([device])
    if args.profile_out:
        with open(args.profile_out, "w") as fh:
            fh.write(text)
    rec = _record(args, device=device.name, threads=args.threads, repetitions=args.reps,
                  note=f"measured_flops={flops!r}")
    return [rec], EXIT_OK


def _common_flags(strategy="all"):
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--layers", help="layer file (name n k d o b per line); default: bundled shapes")
    common.add_argument("--layer", help="layer name for single-layer commands (default: first in file)")
    common.add_argument("--strategy", default=strategy, choices=["1", "2", "3", "auto", "all"])
    common.add_argument("--threads", type=_threads, default=1)
    common.add_argument("--reps", type=int, default=5)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--out", default="-", help="output path, '-' for stdout")
    common.add_argument("--format", default="csv", choices=["csv", "json"])
    common.add_argument("-v", "--verbose", action="store_true")
    return common


def build_parser():

    parser = _Parser(prog="convlower", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("verify", parents=[_common_flags()], help="check every strategy against the direct convolution")
    p.add_argument("--tolerance", type=float, default=1e-3)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("select", parents=[_common_flags()], help="cost-model estimates and chosen strategy per layer")
    p.add_argument("--calibrate", action="store_true", help="measure cost weights on this machine first")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("sweep-ratio", parents=[_common_flags()], help="vary d/o with d*o fixed; model vs measured winner")
    p.add_argument("--ratio-range", type=_ratio_range, default=(1 / 16, 16.0, 5))
    p.add_argument("--no-probe-efficiency", dest="probe_efficiency", action="store_false",
                   help="use shape-independent GEMM efficiency in the model")
    p.set_defaults(func=cmd_sweep_ratio)

    p = sub.add_parser("sweep-batch", parents=[_common_flags("1")], help="throughput versus batch size")
    p.add_argument("--batch", type=_int_list, default=[1, 8, 64])
    p.set_defaults(func=cmd_sweep_batch)

    p = sub.add_parser("sweep-partitions", parents=[_common_flags("1")], help="throughput versus number of batch partitions")
    p.add_argument("--batch", type=_int_list, default=[16])
    p.add_argument("--partitions", type=_partition_list, default=[None, 1, 2, 4])
    p.set_defaults(func=cmd_sweep_partitions)

    p = sub.add_parser("schedule", parents=[_common_flags("1")], help="device split: heuristic, sweep optimum, gap, curve")
    p.add_argument("--devices", required=True, help="device file (name flops overhead per line)")
    p.add_argument("--granularity", type=int, default=100)
    p.add_argument("--audit", type=int, default=0, help="also audit the gap over N random device pairs")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("profile", parents=[_common_flags()], help="measure this CPU and write a device profile line")
    p.add_argument("--name", default="cpu")
    p.add_argument("--cube", type=int, default=512)
    p.add_argument("--profile-out", help="write the device profile file here")
    p.set_defaults(func=cmd_profile)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        records, status = args.func(args)
        text = dump(records, args.format, args.out)
        if args.out in (None, "-"):
            sys.stdout.write(text)
    except ConfigurationError as exc:
        print(f"convlower: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
    return status


if __name__ == "__main__":
    sys.exit(main())
