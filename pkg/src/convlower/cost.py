"""Exact per-phase operation counts and cost-based strategy selection.

Counts come straight from the lowered matrix shapes:

========  =====================  ==========================  ==========================
strategy  lower elements         lift additions              GEMM flops
========  =====================  ==========================  ==========================
type1     ``b m^2 k^2 d``        0                           ``2 b m^2 k^2 d o``
type2     ``b n^2 k d``          ``b m^2 (k - 1) o``         ``2 b n^2 k d k o``
type3     ``b n^2 d``            ``b m^2 (k^2 - 1) o``       ``2 b n^2 d k^2 o``
========  =====================  ==========================  ==========================

The score is ``alpha * (lower + lift) + beta * flops * efficiency[strategy]``
with ``alpha`` in seconds per element moved and ``beta`` in seconds per flop.
"""
from dataclasses import dataclass, field
import math
import time

import numpy as np

from ._validation import DTYPE, ConfigurationError
from .gemm import GemmConfig, gemm_throughput_probe
from .lowering import Strategy
from .tensor import LayerConfig

RATIO_RANGE = (1.0 / 64.0, 64.0)
ELEMENT_BYTES = np.dtype(DTYPE).itemsize


@dataclass(frozen=True)
class CostWeights:
    alpha: float = 5.0e-10
    beta: float = 5.0e-11
    efficiency: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ConfigurationError(f"cost weights must be positive, got alpha={self.alpha}, beta={self.beta}")

    def scaled(self, alpha_factor=1.0, beta_factor=1.0):
        return CostWeights(self.alpha * alpha_factor, self.beta * beta_factor, dict(self.efficiency))

    def gemm_factor(self, strategy):
        return float(self.efficiency.get(Strategy.parse(strategy), 1.0))


DEFAULT_WEIGHTS = CostWeights()


@dataclass(frozen=True)
class CostEstimate:
    strategy: Strategy
    lower_elements_written: int
    gemm_flops: int
    lift_adds: int
    lowered_bytes: int
    total_score: float


@dataclass(frozen=True)
class StrategyChoice:
    strategy: Strategy
    estimates: dict
    ratio: float


def _counts(strategy, n, k, d, o, b):
    """``(lower_elements, lift_adds, gemm_flops)``; accepts real-valued d and o."""
    m = n - k + 1
    if strategy is Strategy.TYPE1:
        return b * m * m * k * k * d, 0, 2 * (b * m * m) * (k * k * d) * o
    if strategy is Strategy.TYPE2:
        return b * n * n * k * d, b * m * m * (k - 1) * o, 2 * (b * n * n) * (k * d) * (k * o)
    return b * n * n * d, b * m * m * (k * k - 1) * o, 2 * (b * n * n) * d * (k * k * o)


def _score(strategy, n, k, d, o, b, weights):
    lowered, adds, flops = _counts(strategy, n, k, d, o, b)
    return weights.alpha * (lowered + adds) + weights.beta * flops * weights.gemm_factor(strategy)


def estimate(strategy, layer, weights=None):
    """Exact counts and weighted score for running ``layer`` with ``strategy``."""
    strategy = Strategy.parse(strategy)
    weights = weights or DEFAULT_WEIGHTS
    lowered, adds, flops = _counts(strategy, layer.n, layer.k, layer.d, layer.o, layer.b)
    return CostEstimate(
        strategy=strategy,
        lower_elements_written=lowered,
        gemm_flops=flops,
        lift_adds=adds,
        lowered_bytes=lowered * ELEMENT_BYTES,
        total_score=_score(strategy, layer.n, layer.k, layer.d, layer.o, layer.b, weights),
    )


def select_strategy(layer, weights=None, candidates=tuple(Strategy)):
    """Pick the lowest-score strategy; ties go to the lower-numbered strategy."""
    estimates = {Strategy.parse(s): estimate(s, layer, weights) for s in candidates}
    best = min(estimates, key=lambda s: (estimates[s].total_score, int(s)))
    return StrategyChoice(strategy=best, estimates=estimates, ratio=layer.ratio)


def _type1_minus_type3(template, ratio, weights):
    product = template.d * template.o
    d = math.sqrt(product * ratio)
    o = math.sqrt(product / ratio)
    args = (template.n, template.k, d, o, template.b)
    return _score(Strategy.TYPE1, *args, weights) - _score(Strategy.TYPE3, *args, weights)


def crossover_ratio(template, weights=None, ratio_range=RATIO_RANGE, tol=1e-9):
    """d/o at which type 1 and type 3 cost the same, holding ``d * o`` fixed.

    Returns ``None`` when the two costs coincide everywhere (``k == 1``),
    ``math.inf`` when type 1 is cheaper across the whole range and ``0.0``
    when type 3 is.
    """
    weights = weights or DEFAULT_WEIGHTS
    if template.k == 1:
        return None
    lo, hi = math.log(ratio_range[0]), math.log(ratio_range[1])
    f_lo = _type1_minus_type3(template, math.exp(lo), weights)
    f_hi = _type1_minus_type3(template, math.exp(hi), weights)
    if f_lo == 0.0:
        return math.exp(lo)
    if f_hi == 0.0:
        return math.exp(hi)
    if f_lo > 0 and f_hi > 0:
        return 0.0
    if f_lo < 0 and f_hi < 0:
        return math.inf
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = _type1_minus_type3(template, math.exp(mid), weights)
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


def _median_time(fn, reps):
    samples = []
    for _ in range(reps):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return float(np.median(samples))


def calibrate_weights(threads=1, reps=5, seed=0, copy_elements=1 << 22, cube=256):
    """Measure ``alpha`` from a bulk copy and ``beta`` from a cube GEMM on this machine.

    The copy goes into a freshly allocated buffer each time, like a lowering does.
    """
    rng = np.random.default_rng(seed)
    src = rng.standard_normal(copy_elements, dtype=DTYPE)

    def copy():
        dst = np.empty_like(src)
        np.copyto(dst, src)

    copy()
    alpha = _median_time(copy, reps) / copy_elements
    flops_per_s = gemm_throughput_probe((cube, cube, cube), GemmConfig(threads=threads), reps=reps, seed=seed)
    return CostWeights(alpha=max(alpha, 1e-15), beta=1.0 / flops_per_s)


def with_measured_efficiency(weights, layer, threads=1, reps=3, seed=0, strategies=tuple(Strategy)):
    """Copy of ``weights`` whose GEMM term is rescaled by the throughput measured on each strategy's actual shape."""
    from .lowering import dhat_shape, khat_shape

    efficiency = dict(weights.efficiency)
    for strategy in strategies:
        rows, inner = dhat_shape(strategy, layer)
        cols = khat_shape(strategy, layer)[1]
        rate = gemm_throughput_probe((rows, inner, cols), GemmConfig(threads=threads), reps=reps, seed=seed)
        efficiency[Strategy.parse(strategy)] = 1.0 / (rate * weights.beta)
    return CostWeights(weights.alpha, weights.beta, efficiency)
