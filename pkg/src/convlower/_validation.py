"""Input validation helpers shared by every module.

Data batches are ``(b, n, n, d)`` arrays, kernel banks are ``(o, k, k, d)``
arrays. Both are C-contiguous float32 after validation, so a single image
``batch[i]`` has flat index ``(r * n + c) * d + ch``.
"""
import numpy as np

DTYPE = np.float32


class ConfigurationError(ValueError):
    """Raised when shapes, plans or config files are inconsistent."""


def as_tensor3(D):
    D = np.ascontiguousarray(D, dtype=DTYPE)
    if D.ndim != 3 or D.shape[0] != D.shape[1]:
        raise ConfigurationError(f"expected an (n, n, d) tensor, got shape {D.shape}")
    return D


def as_kernel(K):
    K = np.ascontiguousarray(K, dtype=DTYPE)
    if K.ndim != 3 or K.shape[0] != K.shape[1]:
        raise ConfigurationError(f"expected a (k, k, d) kernel, got shape {K.shape}")
    return K


def check_batch(X):
    """Return ``X`` as a float32 ``(b, n, n, d)`` array or raise."""
    X = np.ascontiguousarray(X, dtype=DTYPE)
    if X.ndim == 3:
        X = X[np.newaxis]
    if X.ndim != 4 or X.shape[1] != X.shape[2]:
        raise ConfigurationError(f"expected a (b, n, n, d) batch, got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[3] < 1:
        raise ConfigurationError(f"empty batch or depth in shape {X.shape}")
    return X


def check_bank(W):
    """Return ``W`` as a float32 ``(o, k, k, d)`` kernel bank or raise."""
    W = np.ascontiguousarray(W, dtype=DTYPE)
    if W.ndim == 3:
        W = W[np.newaxis]
    if W.ndim != 4 or W.shape[1] != W.shape[2]:
        raise ConfigurationError(f"expected an (o, k, k, d) kernel bank, got shape {W.shape}")
    if W.shape[0] < 1 or W.shape[1] < 1:
        raise ConfigurationError(f"empty kernel bank shape {W.shape}")
    return W


def check_compatible(X, W):
    """Validate a batch against a kernel bank; return both as float32 arrays."""
    X = check_batch(X)
    W = check_bank(W)
    n, d = X.shape[1], X.shape[3]
    k, kd = W.shape[1], W.shape[3]
    if kd != d or k > n:
        raise ConfigurationError(
            f"data shape {X.shape[1:]} incompatible with kernel shape {W.shape[1:]}"
        )
    return X, W


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ConfigurationError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigurationError(f"{name} must be >= {minimum}, got {value}")
    return int(value)
