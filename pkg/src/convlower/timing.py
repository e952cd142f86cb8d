"""Repeated wall-clock measurement with median and interquartile range."""
from dataclasses import dataclass
import time

import numpy as np

DEFAULT_REPS = 5
DEFAULT_WARMUP = 1


@dataclass(frozen=True)
class Summary:
    median: float
    iqr: float
    reps: int

    @classmethod
    def of(cls, samples):
        samples = np.asarray(samples, dtype=float)
        q1, q2, q3 = np.percentile(samples, [25, 50, 75])
        return cls(median=float(q2), iqr=float(q3 - q1), reps=len(samples))

    @property
    def cv(self):
        return self.iqr / self.median if self.median else 0.0


def repeat(fn, reps=DEFAULT_REPS, warmup=DEFAULT_WARMUP):
    """Call ``fn`` ``warmup`` times, then ``reps`` times; return ``(last result, wall times)``."""
    result = None
    for _ in range(warmup):
        result = fn()
    samples = []
    for _ in range(reps):
        start = time.perf_counter()
        result = fn()
        samples.append(time.perf_counter() - start)
    return result, samples
