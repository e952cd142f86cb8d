"""Measurement routines shared by the CLI and the acceptance suite."""
import numpy as np

from ._validation import DTYPE
from .batching import execute_partitioned, execute_per_image
from .cost import select_strategy
from .lowering import Strategy, convolve_lowered
from .tensor import direct_convolve_batch
from .timing import DEFAULT_REPS, DEFAULT_WARMUP, Summary


def random_instance(layer, rng):
    """Uniform [-1, 1) batch and kernel bank for ``layer``."""
    X = rng.uniform(-1.0, 1.0, size=(layer.b, layer.n, layer.n, layer.d)).astype(DTYPE)
    W = rng.uniform(-1.0, 1.0, size=(layer.o, layer.k, layer.k, layer.d)).astype(DTYPE)
    return X, W


def max_relative_error(actual, expected):
    """``max |actual - expected| / max |expected|`` over the whole output."""
    expected = np.asarray(expected, dtype=np.float64)
    diff = np.max(np.abs(np.asarray(actual, dtype=np.float64) - expected)) if expected.size else 0.0
    scale = np.max(np.abs(expected)) if expected.size else 0.0
    return float(diff / scale) if scale > 0 else float(diff)


def verify_layer(layer, rng, strategies=tuple(Strategy), tolerance=1e-3, threads=1):
    """Oracle check of every strategy on random data: ``[(strategy, error, passed)]``."""
    X, W = random_instance(layer, rng)
    reference = direct_convolve_batch(X, W)
    results = []
    for strategy in strategies:
        out, _ = convolve_lowered(X, W, strategy, gemm_threads=threads)
        err = max_relative_error(out, reference)
        results.append((Strategy.parse(strategy), err, err <= tolerance))
    return results


def summarize_phases(runs):
    """Per-phase ``Summary`` from a list of ``PhaseTimings``."""
    return {
        "lower": Summary.of([t.lower for t in runs]),
        "multiply": Summary.of([t.multiply for t in runs]),
        "lift": Summary.of([t.lift for t in runs]),
        "total": Summary.of([t.total for t in runs]),
    }


def time_strategy(X, W, strategy, threads=1, reps=DEFAULT_REPS, warmup=DEFAULT_WARMUP):
    for _ in range(warmup):
        convolve_lowered(X, W, strategy, gemm_threads=threads)
    runs = [convolve_lowered(X, W, strategy, gemm_threads=threads)[1] for _ in range(reps)]
    return summarize_phases(runs)


def _time_execution(run, reps, warmup):
    for _ in range(warmup):
        run()
    walls, phases = [], []
    report = None
    for _ in range(reps):
        _, timing, report = run()
        walls.append(timing.wall)
        phases.append(timing.phases)
    summary = summarize_phases(phases)
    summary["wall"] = Summary.of(walls)
    return summary, report


def time_partitioned(X, W, strategy, plan, reps=DEFAULT_REPS, warmup=DEFAULT_WARMUP):
    """Phase and wall-clock summaries of ``execute_partitioned`` plus its footprint."""
    return _time_execution(lambda: execute_partitioned(X, W, strategy, plan), reps, warmup)


def time_per_image(X, W, strategy, threads, reps=DEFAULT_REPS, warmup=DEFAULT_WARMUP):
    """Same as ``time_partitioned`` for the one-image-at-a-time baseline."""
    return _time_execution(lambda: execute_per_image(X, W, strategy, threads=threads), reps, warmup)


def model_vs_measured(layer, weights, rng, strategies=(Strategy.TYPE1, Strategy.TYPE3), threads=1,
                      reps=DEFAULT_REPS, warmup=DEFAULT_WARMUP):
    """Winner by cost model and by measured median time among ``strategies``.

    Returns ``(model_winner, measured_winner, choice, {strategy: phase summaries})``.
    """
    choice = select_strategy(layer, weights, candidates=strategies)
    X, W = random_instance(layer, rng)
    timings = {s: time_strategy(X, W, s, threads=threads, reps=reps, warmup=warmup) for s in strategies}
    measured = min(strategies, key=lambda s: (timings[s]["total"].median, int(s)))
    return choice.strategy, measured, choice, timings
