"""Problem shapes and the direct (loop-nest) convolution used as ground truth."""
from dataclasses import dataclass

import numba
import numpy as np

from ._validation import (
    ConfigurationError,
    as_kernel,
    as_tensor3,
    check_compatible,
    check_positive_int,
)


@dataclass(frozen=True)
class LayerConfig:
    """Shape of one convolution layer: ``b`` images of ``n x n x d`` and ``o`` kernels of ``k x k x d``."""

    n: int
    k: int
    d: int
    o: int
    b: int = 1

    def __post_init__(self):
        for name in ("n", "k", "d", "o", "b"):
            check_positive_int(getattr(self, name), name)
        if self.k > self.n:
            raise ConfigurationError(f"kernel side k={self.k} exceeds input side n={self.n}")

    @property
    def m(self):
        return self.n - self.k + 1

    @property
    def ratio(self):
        return self.d / self.o

    @classmethod
    def from_arrays(cls, X, W):
        X, W = check_compatible(X, W)
        return cls(n=X.shape[1], k=W.shape[1], d=X.shape[3], o=W.shape[0], b=X.shape[0])

    def with_batch(self, b):
        return LayerConfig(self.n, self.k, self.d, self.o, b)

    def with_channels(self, d, o):
        return LayerConfig(self.n, self.k, d, o, self.b)


@numba.njit(nogil=True, cache=True)
def _direct_plane(D, K, out):
    n = D.shape[0]
    d = D.shape[2]
    k = K.shape[0]
    m = n - k + 1
    for r in range(m):
        for c in range(m):
            acc = 0.0
            for i in range(d):
                for cc in range(k):
                    for rr in range(k):
                        acc += np.float64(D[r + rr, c + cc, i]) * np.float64(K[rr, cc, i])
            out[r, c] = acc


def direct_convolve(D, K):
    """Convolve one ``(n, n, d)`` tensor with one ``(k, k, d)`` kernel.

    Returns the ``(m, m)`` float64 plane with
    ``R[r, c] = sum_i sum_c' sum_r' D[r + r', c + c', i] * K[r', c', i]``,
    accumulated in float64 in that loop order.
    """
    D = as_tensor3(D)
    K = as_kernel(K)
    if K.shape[2] != D.shape[2] or K.shape[0] > D.shape[0]:
        raise ConfigurationError(f"data shape {D.shape} incompatible with kernel shape {K.shape}")
    m = D.shape[0] - K.shape[0] + 1
    out = np.empty((m, m), dtype=np.float64)
    _direct_plane(D, K, out)
    return out


def direct_convolve_batch(X, W):
    """Direct convolution of a ``(b, n, n, d)`` batch with an ``(o, k, k, d)`` bank.

    Output is ``(b, o, m, m)``: image-major, then kernel, then the plane.
    """
    X, W = check_compatible(X, W)
    b, n = X.shape[0], X.shape[1]
    o, k = W.shape[0], W.shape[1]
    m = n - k + 1
    out = np.empty((b, o, m, m), dtype=np.float64)
    for i in range(b):
        for j in range(o):
            _direct_plane(X[i], W[j], out[i, j])
    return out
