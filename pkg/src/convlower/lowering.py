"""Lower -> multiply -> lift convolution with three matrix layouts.

Every lowered row index is column-major over output positions
(``c * m + r`` or ``c * n + r``), and every row/column vector is flattened
depth-minor, the same order the data tensor is stored in.

* ``TYPE1``: one row per output pixel holding its whole ``k x k x d`` patch.
  ``Dhat`` is ``(b*m^2, k^2*d)``, ``Khat`` is ``(k^2*d, o)``, lifting is a reshape.
* ``TYPE2``: one row per input pixel holding a ``1 x k x d`` strip.
  ``Dhat`` is ``(b*n^2, k*d)``, ``Khat`` is ``(k*d, k*o)``, lifting adds ``k`` terms.
* ``TYPE3``: one row per input pixel holding its ``d`` channels.
  ``Dhat`` is ``(b*n^2, d)``, ``Khat`` is ``(d, k^2*o)``, lifting adds ``k^2`` terms.

Type 2 rows for ``c >= m`` would read past the right edge; they are never
used by lifting and are written as zeros.
"""
from dataclasses import dataclass
import enum
import time

import numpy as np

from ._validation import DTYPE, ConfigurationError, check_bank, check_batch, check_compatible
from .gemm import GemmConfig, gemm_flops, multiply
from .tensor import LayerConfig


class Strategy(enum.IntEnum):
    TYPE1 = 1
    TYPE2 = 2
    TYPE3 = 3

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower().removeprefix("type")
        try:
            return cls(int(text))
        except ValueError:
            raise ConfigurationError(f"unknown lowering strategy {value!r}") from None

    @property
    def label(self):
        return f"type{self.value}"


@dataclass
class OpCounter:
    """Tally of elements written while lowering and additions performed while lifting."""

    lower_elements_written: int = 0
    kernel_elements_written: int = 0
    lift_adds: int = 0
    output_elements: int = 0
    gemm_flops: int = 0

    def merge(self, other):
        self.lower_elements_written += other.lower_elements_written
        self.kernel_elements_written += other.kernel_elements_written
        self.lift_adds += other.lift_adds
        self.output_elements += other.output_elements
        self.gemm_flops += other.gemm_flops
        return self


@dataclass(frozen=True)
class LoweredMatrices:
    strategy: Strategy
    Dhat: np.ndarray
    Khat: np.ndarray
    layer: LayerConfig


@dataclass
class PhaseTimings:
    lower: float = 0.0
    multiply: float = 0.0
    lift: float = 0.0

    @property
    def total(self):
        return self.lower + self.multiply + self.lift

    def __iadd__(self, other):
        self.lower += other.lower
        self.multiply += other.multiply
        self.lift += other.lift
        return self


def dhat_shape(strategy, layer):
    strategy = Strategy.parse(strategy)
    n, k, d, m, b = layer.n, layer.k, layer.d, layer.m, layer.b
    if strategy is Strategy.TYPE1:
        return (b * m * m, k * k * d)
    if strategy is Strategy.TYPE2:
        return (b * n * n, k * d)
    return (b * n * n, d)


def khat_shape(strategy, layer):
    strategy = Strategy.parse(strategy)
    k, d, o = layer.k, layer.d, layer.o
    if strategy is Strategy.TYPE1:
        return (k * k * d, o)
    if strategy is Strategy.TYPE2:
        return (k * d, k * o)
    return (d, k * k * o)


def rhat_shape(strategy, layer):
    return (dhat_shape(strategy, layer)[0], khat_shape(strategy, layer)[1])


def lower_data(X, k, strategy, counter=None):
    """Build ``Dhat`` for a ``(b, n, n, d)`` batch and kernel side ``k``."""
    strategy = Strategy.parse(strategy)
    X = check_batch(X)
    b, n, _, d = X.shape
    if not 1 <= k <= n:
        raise ConfigurationError(f"kernel side k={k} invalid for input side n={n}")
    m = n - k + 1
    # (b, n, n, d) indexed [img, c, r, ch]
    Xt = X.transpose(0, 2, 1, 3)

    if strategy is Strategy.TYPE1:
        Dhat = np.empty((b * m * m, k * k * d), dtype=DTYPE)
        view = Dhat.reshape(b, m, m, k, k, d)
        for rr in range(k):
            for cc in range(k):
                view[:, :, :, rr, cc, :] = Xt[:, cc:cc + m, rr:rr + m, :]
        written = Dhat.size
    elif strategy is Strategy.TYPE2:
        Dhat = np.empty((b * n * n, k * d), dtype=DTYPE)
        view = Dhat.reshape(b, n, n, k, d)
        for cc in range(k):
            view[:, :m, :, cc, :] = Xt[:, cc:cc + m, :, :]
        view[:, m:] = 0.0
        written = Dhat.size
    else:
        Dhat = np.empty((b * n * n, d), dtype=DTYPE)
        Dhat.reshape(b, n, n, d)[...] = Xt
        written = Dhat.size

    if counter is not None:
        counter.lower_elements_written += written
    return Dhat


def lower_kernels(W, strategy, counter=None):
    """Build ``Khat`` for an ``(o, k, k, d)`` kernel bank; kernel ``j`` owns column block ``j``."""
    strategy = Strategy.parse(strategy)
    W = check_bank(W)
    o, k, _, d = W.shape
    if strategy is Strategy.TYPE1:
        Khat = np.ascontiguousarray(W.reshape(o, k * k * d).T)
    elif strategy is Strategy.TYPE2:
        Khat = np.ascontiguousarray(W.reshape(o * k, k * d).T)
    else:
        Khat = np.ascontiguousarray(W.reshape(o * k * k, d).T)
    if counter is not None:
        counter.kernel_elements_written += Khat.size
    return Khat


def lower(X, W, strategy, counter=None):
    """Lower a batch and kernel bank into the ``(Dhat, Khat)`` pair for ``strategy``."""
    X, W = check_compatible(X, W)
    strategy = Strategy.parse(strategy)
    layer = LayerConfig.from_arrays(X, W)
    return LoweredMatrices(
        strategy=strategy,
        Dhat=lower_data(X, layer.k, strategy, counter),
        Khat=lower_kernels(W, strategy, counter),
        layer=layer,
    )


def lift(Rhat, strategy, layer, counter=None):
    """Map ``Rhat = Dhat @ Khat`` back to a ``(b, o, m, m)`` output batch."""
    strategy = Strategy.parse(strategy)
    Rhat = np.asarray(Rhat)
    expected = rhat_shape(strategy, layer)
    if Rhat.shape != expected:
        raise ConfigurationError(
            f"{strategy.label} lifting expects Rhat of shape {expected}, got {Rhat.shape}"
        )
    n, k, o, m, b = layer.n, layer.k, layer.o, layer.m, layer.b
    # accumulate in Rhat's own [img, c, r, kernel] order, transpose once at the end
    acc = np.empty((b, m, m, o), dtype=DTYPE)
    adds = 0
    if strategy is Strategy.TYPE1:
        acc[...] = Rhat.reshape(b, m, m, o)
    elif strategy is Strategy.TYPE2:
        view = Rhat.reshape(b, n, n, o, k)
        acc[...] = view[:, :m, 0:m, :, 0]
        for i in range(1, k):
            acc += view[:, :m, i:i + m, :, i]
            adds += acc.size
    else:
        view = Rhat.reshape(b, n, n, o, k, k)
        acc[...] = view[:, 0:m, 0:m, :, 0, 0]
        for i in range(k):
            for j in range(k):
                if i == 0 and j == 0:
                    continue
                acc += view[:, j:j + m, i:i + m, :, i, j]
                adds += acc.size
    out = np.ascontiguousarray(acc.transpose(0, 3, 2, 1))
    if counter is not None:
        counter.lift_adds += adds
        counter.output_elements += out.size
    return out


def convolve_lowered(X, W, strategy, gemm_threads=1, gemm_config=None, counter=None, Khat=None):
    """Run lower, multiply and lift; return ``(output, PhaseTimings)``.

    ``Khat`` may be passed in pre-lowered (it depends only on the kernels).
    """
    X, W = check_compatible(X, W)
    strategy = Strategy.parse(strategy)
    layer = LayerConfig.from_arrays(X, W)
    cfg = gemm_config or GemmConfig(threads=gemm_threads)
    timings = PhaseTimings()

    start = time.perf_counter()
    Dhat = lower_data(X, layer.k, strategy, counter)
    if Khat is None:
        Khat = lower_kernels(W, strategy, counter)
    elif Khat.shape != khat_shape(strategy, layer):
        raise ConfigurationError(f"pre-lowered Khat has shape {Khat.shape}, expected {khat_shape(strategy, layer)}")
    timings.lower = time.perf_counter() - start

    start = time.perf_counter()
    Rhat = multiply(Dhat, Khat, cfg)
    timings.multiply = time.perf_counter() - start
    if counter is not None:
        counter.gemm_flops += gemm_flops(Dhat.shape[0], Dhat.shape[1], Khat.shape[1])

    start = time.perf_counter()
    out = lift(Rhat, strategy, layer, counter)
    timings.lift = time.perf_counter() - start
    return out, timings
