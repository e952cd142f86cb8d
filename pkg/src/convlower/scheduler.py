"""Splitting a batch across devices and simulating the resulting makespan.

A device's finishing time is ``overhead + share * work / flops`` where
``work`` is the layer's GEMM flop count; a device that receives no images is
never dispatched and finishes at time zero. For two devices the split is
described by ``p``, the fraction sent to the second device.
"""
from dataclasses import dataclass
import math

import numpy as np

from ._validation import ConfigurationError, check_positive_int
from .cost import estimate
from .lowering import Strategy


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    flops: float
    fixed_overhead: float = 0.0

    def __post_init__(self):
        if not self.flops > 0:
            raise ConfigurationError(f"device {self.name!r} needs flops > 0, got {self.flops}")
        if self.fixed_overhead < 0:
            raise ConfigurationError(f"device {self.name!r} has negative overhead {self.fixed_overhead}")


@dataclass(frozen=True)
class SplitPlan:
    fractions: tuple
    counts: tuple


def round_counts(fractions, b):
    """Largest-remainder rounding of ``fractions * b`` to integers summing to ``b``."""
    raw = [f * b for f in fractions]
    counts = [math.floor(x) for x in raw]
    leftover = b - sum(counts)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:leftover]:
        counts[i] += 1
    return tuple(counts)


def make_plan(fractions, b=1):
    fractions = tuple(float(f) for f in fractions)
    if any(f < 0 or f > 1 for f in fractions) or not math.isclose(sum(fractions), 1.0, abs_tol=1e-12):
        raise ConfigurationError(f"fractions must lie in [0, 1] and sum to 1, got {fractions}")
    return SplitPlan(fractions=fractions, counts=round_counts(fractions, b))


def proportional_split(devices, b=1):
    """Give each device the share of input equal to its share of total flops."""
    if not devices:
        raise ConfigurationError("at least one device is required")
    total = math.fsum(dev.flops for dev in devices)
    fractions = [dev.flops / total for dev in devices]
    fractions[-1] = 1.0 - math.fsum(fractions[:-1])
    return make_plan(fractions, b)


def layer_work(layer, strategy=Strategy.TYPE1):
    return estimate(strategy, layer).gemm_flops


def device_times(layer, plan, devices, strategy=Strategy.TYPE1):
    if len(plan.fractions) != len(devices):
        raise ConfigurationError(f"plan has {len(plan.fractions)} fractions for {len(devices)} devices")
    work = layer_work(layer, strategy)
    return [
        0.0 if frac == 0 else dev.fixed_overhead + frac * work / dev.flops
        for frac, dev in zip(plan.fractions, devices)
    ]


def simulate_makespan(layer, plan, devices, strategy=Strategy.TYPE1):
    """Finishing time of the slowest device, in seconds."""
    return max(device_times(layer, plan, devices, strategy))


def _require_pair(devices):
    if len(devices) != 2:
        raise ConfigurationError(f"split sweeps support exactly 2 devices, got {len(devices)}")


def makespan_curve(layer, devices, granularity, strategy=Strategy.TYPE1, b=None):
    """``[(p, makespan)]`` for ``p`` in ``0, 1/g, ..., 1`` (fraction on the second device)."""
    _require_pair(devices)
    granularity = check_positive_int(granularity, "granularity")
    b = layer.b if b is None else b
    curve = []
    for step in range(granularity + 1):
        p = step / granularity
        plan = make_plan((1.0 - p, p), b)
        curve.append((p, simulate_makespan(layer, plan, devices, strategy)))
    return curve


def optimal_split_sweep(layer, devices, granularity, strategy=Strategy.TYPE1):
    """Best grid split for two devices; ties go to the smaller second-device fraction."""
    _require_pair(devices)
    if granularity < 10:
        raise ConfigurationError(f"granularity must be >= 10, got {granularity}")
    curve = makespan_curve(layer, devices, granularity, strategy)
    best_p, _ = min(curve, key=lambda pt: (pt[1], pt[0]))
    return make_plan((1.0 - best_p, best_p), layer.b)


def heuristic_gap(layer, devices, granularity, strategy=Strategy.TYPE1):
    """Makespan of the proportional split divided by that of the sweep optimum."""
    _require_pair(devices)
    heuristic = simulate_makespan(layer, proportional_split(devices, layer.b), devices, strategy)
    best = simulate_makespan(layer, optimal_split_sweep(layer, devices, granularity, strategy), devices, strategy)
    return heuristic / best


def random_device_pair(rng, work, overhead_fraction=0.05, flops_range=(1e9, 1e13)):
    """Two devices with log-uniform flops and overheads up to ``overhead_fraction`` of the balanced work time."""
    lo, hi = np.log(flops_range[0]), np.log(flops_range[1])
    flops = np.exp(rng.uniform(lo, hi, size=2))
    balanced = work / flops.sum()
    overheads = rng.uniform(0.0, overhead_fraction * balanced, size=2) if overhead_fraction > 0 else (0.0, 0.0)
    return [
        DeviceProfile("dev0", float(flops[0]), float(overheads[0])),
        DeviceProfile("dev1", float(flops[1]), float(overheads[1])),
    ]


def gap_audit(layer, count=1000, overhead_fraction=0.05, granularity=100, seed=0, strategy=Strategy.TYPE1):
    """Heuristic gaps over ``count`` seeded random device pairs."""
    rng = np.random.default_rng(seed)
    work = layer_work(layer, strategy)
    return [
        heuristic_gap(layer, random_device_pair(rng, work, overhead_fraction), granularity, strategy)
        for _ in range(count)
    ]


def parse_device_profiles(lines, source="<devices>"):
    """Parse ``name flops overhead`` records; ``#`` starts a comment, overhead may be omitted."""
    devices = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) not in (2, 3):
            raise ConfigurationError(f"{source}:{lineno}: expected 'name flops [overhead]', got {raw.strip()!r}")
        try:
            flops = float(fields[1])
            overhead = float(fields[2]) if len(fields) == 3 else 0.0
            devices.append(DeviceProfile(fields[0], flops, overhead))
        except (ValueError, ConfigurationError) as exc:
            raise ConfigurationError(f"{source}:{lineno}: {exc}") from None
    if not devices:
        raise ConfigurationError(f"{source}: no devices defined")
    return devices


def load_device_profiles(path):
    with open(path) as fh:
        return parse_device_profiles(fh, source=str(path))


def format_device_profiles(devices):
    return "".join(f"{dev.name} {dev.flops!r} {dev.fixed_overhead!r}\n" for dev in devices)
