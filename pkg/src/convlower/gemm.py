"""Blocked, thread-partitioned float32 matrix multiply.

The kernel tiles the output into ``block_rows x block_cols`` tiles, packs the
matching ``block_inner x block_cols`` slab of ``B`` and accumulates each inner
block in float32 before adding it into a float64 tile accumulator. Inner
blocks always start at multiples of ``block_inner`` and are visited in
ascending order, so the summation sequence of an output element does not
depend on how the output is split across workers: results are bit-identical
for every thread count.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import statistics
import time

import numba
import numpy as np

from ._validation import DTYPE, ConfigurationError, check_positive_int

MAX_THREADS = 64
PROBE_MEMORY_BUDGET = 1 << 30


@dataclass(frozen=True)
class GemmConfig:
    threads: int = 1
    block_rows: int = 64
    block_cols: int = 128
    block_inner: int = 256

    def __post_init__(self):
        check_positive_int(self.threads, "threads")
        if self.threads > MAX_THREADS:
            raise ConfigurationError(f"threads={self.threads} exceeds the maximum of {MAX_THREADS}")
        for name in ("block_rows", "block_cols", "block_inner"):
            check_positive_int(getattr(self, name), name)


@numba.njit(nogil=True, fastmath={"contract"}, cache=True)
def _blocked_kernel(A, B, C, r0, r1, c0, c1, bm, bn, bk):
    inner = A.shape[1]
    acc = np.empty((bm, bn), dtype=np.float64)
    part = np.empty((bm, bn), dtype=np.float32)
    bpack = np.empty((bk, bn), dtype=np.float32)
    for j0 in range(c0, c1, bn):
        w = min(j0 + bn, c1) - j0
        for i0 in range(r0, r1, bm):
            h = min(i0 + bm, r1) - i0
            acc[:h, :w] = 0.0
            for t0 in range(0, inner, bk):
                depth = min(t0 + bk, inner) - t0
                for t in range(depth):
                    for j in range(w):
                        bpack[t, j] = B[t0 + t, j0 + j]
                # float32 within one inner block, float64 across blocks
                part[:h, :w] = 0.0
                for i in range(h):
                    for t in range(depth):
                        a = A[i0 + i, t0 + t]
                        for j in range(w):
                            part[i, j] += a * bpack[t, j]
                for i in range(h):
                    for j in range(w):
                        acc[i, j] += part[i, j]
            for i in range(h):
                for j in range(w):
                    C[i0 + i, j0 + j] = acc[i, j]


@numba.njit(nogil=True, cache=True)
def _naive_kernel(A, B, C):
    rows, inner = A.shape
    cols = B.shape[1]
    for i in range(rows):
        for j in range(cols):
            acc = 0.0
            for t in range(inner):
                acc += np.float64(A[i, t]) * np.float64(B[t, j])
            C[i, j] = acc


def _check_pair(A, B):
    A = np.ascontiguousarray(A, dtype=DTYPE)
    B = np.ascontiguousarray(B, dtype=DTYPE)
    if A.ndim != 2 or B.ndim != 2:
        raise ConfigurationError(f"multiply needs 2-D operands, got {A.shape} and {B.shape}")
    if A.shape[1] != B.shape[0]:
        raise ConfigurationError(f"inner dimensions differ: {A.shape} x {B.shape}")
    return A, B


def split_range(total, parts):
    """Split ``range(total)`` into ``parts`` contiguous ``(start, stop)`` chunks, larger chunks first."""
    base, extra = divmod(total, parts)
    bounds = []
    start = 0
    for idx in range(parts):
        stop = start + base + (1 if idx < extra else 0)
        bounds.append((start, stop))
        start = stop
    return bounds


def partition_layout(rows, cols, threads):
    """Return the per-worker ``(r0, r1, c0, c1)`` output regions for ``threads`` workers.

    Columns of ``B`` are split when there are at least as many columns as
    workers; otherwise the rows of ``A`` are split instead.
    """
    if cols >= threads:
        return [(0, rows, c0, c1) for c0, c1 in split_range(cols, threads)]
    return [(r0, r1, 0, cols) for r0, r1 in split_range(rows, threads) if r1 > r0]


def multiply(A, B, cfg=None):
    """Compute ``A @ B`` in float32 with ``cfg.threads`` workers on disjoint output regions."""
    cfg = cfg or GemmConfig()
    A, B = _check_pair(A, B)
    rows, cols = A.shape[0], B.shape[1]
    C = np.empty((rows, cols), dtype=DTYPE)
    if rows == 0 or cols == 0:
        return C
    if A.shape[1] == 0:
        C.fill(0.0)
        return C
    regions = partition_layout(rows, cols, cfg.threads)
    args = (cfg.block_rows, cfg.block_cols, cfg.block_inner)
    if len(regions) == 1:
        _blocked_kernel(A, B, C, *regions[0], *args)
        return C
    with ThreadPoolExecutor(max_workers=len(regions)) as pool:
        futures = [pool.submit(_blocked_kernel, A, B, C, *region, *args) for region in regions]
        for fut in futures:
            fut.result()
    return C


def multiply_reference(A, B):
    """Naive triple loop with a float64 accumulator; returns a float64 matrix."""
    A, B = _check_pair(A, B)
    C = np.empty((A.shape[0], B.shape[1]), dtype=np.float64)
    _naive_kernel(A, B, C)
    return C


def gemm_flops(rows, inner, cols):
    return 2 * rows * inner * cols


def gemm_throughput_probe(shape, cfg=None, reps=5, warmup=1, seed=0, return_samples=False):
    """Median FLOP/s of ``multiply`` on random operands of ``shape = (rows, inner, cols)``.

    FLOPs are counted as ``2 * rows * inner * cols``. Raises ``MemoryError``
    when the operands would exceed the probe memory budget.
    """
    cfg = cfg or GemmConfig()
    rows, inner, cols = (check_positive_int(v, "shape entry") for v in shape)
    nbytes = 4 * (rows * inner + inner * cols + rows * cols)
    if nbytes > PROBE_MEMORY_BUDGET:
        raise MemoryError(f"probe shape {shape} needs {nbytes} bytes, budget is {PROBE_MEMORY_BUDGET}")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((rows, inner), dtype=DTYPE)
    B = rng.standard_normal((inner, cols), dtype=DTYPE)
    for _ in range(warmup):
        multiply(A, B, cfg)
    flops = gemm_flops(rows, inner, cols)
    samples = []
    for _ in range(reps):
        start = time.perf_counter()
        multiply(A, B, cfg)
        samples.append(flops / max(time.perf_counter() - start, 1e-12))
    median = statistics.median(samples)
    return (median, samples) if return_samples else median
