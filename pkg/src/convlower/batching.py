"""Batch partitioning: ``p`` concurrent partitions, each lowering and multiplying its own slice.

With ``p == 1`` the whole batch is lowered at once and one GEMM uses every
thread. With ``p > 1`` the batch is split into near-equal contiguous slices
and the thread budget is divided among them, remainders going to the first
partitions. ``execute_per_image`` is the one-image-at-a-time baseline.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import time

import numpy as np

from ._validation import DTYPE, ConfigurationError, check_compatible, check_positive_int
from .gemm import split_range
from .lowering import OpCounter, PhaseTimings, Strategy, convolve_lowered, dhat_shape, khat_shape, lower_kernels
from .tensor import LayerConfig

ELEMENT_BYTES = np.dtype(DTYPE).itemsize


@dataclass(frozen=True)
class PartitionPlan:
    partition_sizes: tuple
    threads_per_partition: tuple

    @property
    def partitions(self):
        return len(self.partition_sizes)

    @property
    def batch_size(self):
        return sum(self.partition_sizes)

    @property
    def total_threads(self):
        return sum(self.threads_per_partition)

    def slices(self):
        bounds = []
        start = 0
        for size in self.partition_sizes:
            bounds.append(slice(start, start + size))
            start += size
        return bounds


@dataclass(frozen=True)
class FootprintReport:
    strategy: Strategy
    lowered_bytes_per_partition: int
    fixed_bytes: int
    partitions: int

    @property
    def peak_bytes(self):
        return self.partitions * self.lowered_bytes_per_partition + self.fixed_bytes


@dataclass
class ExecutionTiming:
    wall: float
    phases: PhaseTimings
    per_partition: list


def plan_partitions(b, total_threads, p):
    """Split ``b`` images into ``p`` partitions sharing ``total_threads`` GEMM threads."""
    b = check_positive_int(b, "batch size")
    total_threads = check_positive_int(total_threads, "total_threads")
    p = check_positive_int(p, "partitions")
    if p > min(b, total_threads):
        raise ConfigurationError(
            f"partitions={p} must not exceed batch size {b} or thread budget {total_threads}"
        )
    sizes = tuple(stop - start for start, stop in split_range(b, p))
    threads = tuple(stop - start for start, stop in split_range(total_threads, p))
    return PartitionPlan(partition_sizes=sizes, threads_per_partition=threads)


def footprint(strategy, layer, partition_size, partitions=1):
    """Bytes of the lowered data matrix per partition, plus the shared lowered kernels."""
    strategy = Strategy.parse(strategy)
    partition_size = check_positive_int(partition_size, "partition_size")
    rows, cols = dhat_shape(strategy, layer.with_batch(partition_size))
    krows, kcols = khat_shape(strategy, layer)
    return FootprintReport(
        strategy=strategy,
        lowered_bytes_per_partition=rows * cols * ELEMENT_BYTES,
        fixed_bytes=krows * kcols * ELEMENT_BYTES,
        partitions=partitions,
    )


def execute_partitioned(X, W, strategy, plan, counter=None):
    """Convolve ``X`` with ``W`` partition by partition; returns ``(output, ExecutionTiming, FootprintReport)``."""
    X, W = check_compatible(X, W)
    strategy = Strategy.parse(strategy)
    layer = LayerConfig.from_arrays(X, W)
    if plan.batch_size != layer.b:
        raise ConfigurationError(f"plan covers {plan.batch_size} images but the batch has {layer.b}")

    Khat = lower_kernels(W, strategy, counter)
    out = np.empty((layer.b, layer.o, layer.m, layer.m), dtype=DTYPE)
    counters = [OpCounter() for _ in plan.partition_sizes]

    def run(idx, sl):
        result, timings = convolve_lowered(
            X[sl], W, strategy, gemm_threads=plan.threads_per_partition[idx], counter=counters[idx], Khat=Khat
        )
        out[sl] = result
        return timings

    start = time.perf_counter()
    if plan.partitions == 1:
        per_partition = [run(0, plan.slices()[0])]
    else:
        with ThreadPoolExecutor(max_workers=plan.partitions) as pool:
            futures = [pool.submit(run, idx, sl) for idx, sl in enumerate(plan.slices())]
            per_partition = [fut.result() for fut in futures]
    wall = time.perf_counter() - start

    phases = PhaseTimings()
    for timings in per_partition:
        phases += timings
    if counter is not None:
        for c in counters:
            counter.merge(c)
    report = footprint(strategy, layer, max(plan.partition_sizes), plan.partitions)
    return out, ExecutionTiming(wall=wall, phases=phases, per_partition=per_partition), report


def execute_per_image(X, W, strategy, threads=1, counter=None):
    """Baseline: lower and multiply one image at a time, every thread in each GEMM."""
    X, W = check_compatible(X, W)
    strategy = Strategy.parse(strategy)
    layer = LayerConfig.from_arrays(X, W)
    Khat = lower_kernels(W, strategy, counter)
    out = np.empty((layer.b, layer.o, layer.m, layer.m), dtype=DTYPE)
    phases = PhaseTimings()
    per_image = []
    start = time.perf_counter()
    for i in range(layer.b):
        out[i : i + 1], timings = convolve_lowered(
            X[i : i + 1], W, strategy, gemm_threads=threads, counter=counter, Khat=Khat
        )
        phases += timings
        per_image.append(timings)
    wall = time.perf_counter() - start
    report = footprint(strategy, layer, 1, 1)
    return out, ExecutionTiming(wall=wall, phases=phases, per_partition=per_image), report
