"""scikit-learn compatible wrapper around lowered convolution."""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import ConfigurationError, check_bank, check_batch, check_compatible, check_positive_int
from .batching import execute_partitioned, plan_partitions
from .cost import CostWeights, calibrate_weights, select_strategy
from .lowering import Strategy, lower_kernels
from .tensor import LayerConfig


class LoweredConv2D(TransformerMixin, BaseEstimator):
    """Valid (stride 1, no padding) multi-channel convolution via lowering.

    Parameters
    ----------
    kernels : array of shape (o, k, k, d)
        Kernel bank; ``transform`` returns one output plane per kernel.
    strategy : {"auto", 1, 2, 3}, default="auto"
        Lowering layout. ``"auto"`` picks the cheapest one under the cost
        model when ``fit`` sees the input shape.
    n_threads : int, default=1
        Total GEMM thread budget.
    n_partitions : int, default=1
        Number of batch partitions run concurrently. Clipped to the batch
        size at transform time.
    weights : CostWeights, "calibrate" or None
        Cost-model weights for ``strategy="auto"``; ``"calibrate"`` measures
        them on this machine during ``fit``.

    Attributes
    ----------
    strategy_ : Strategy
    layer_ : LayerConfig
        Shape seen during ``fit`` (its ``b`` is the fitted batch size).
    choice_ : StrategyChoice
        Cost estimates behind the selected strategy.
    timings_ : ExecutionTiming
        Timings of the most recent ``transform``.
    """

    def __init__(self, kernels=None, strategy="auto", n_threads=1, n_partitions=1, weights=None):
        self.kernels = kernels
        self.strategy = strategy
        self.n_threads = n_threads
        self.n_partitions = n_partitions
        self.weights = weights

    def _resolve_weights(self):
        if self.weights is None or isinstance(self.weights, CostWeights):
            return self.weights
        if self.weights == "calibrate":
            return calibrate_weights(threads=self.n_threads)
        raise ConfigurationError(f"weights must be None, 'calibrate' or CostWeights, got {self.weights!r}")

    def fit(self, X, y=None):
        if self.kernels is None:
            raise ConfigurationError("LoweredConv2D needs a kernel bank")
        check_positive_int(self.n_threads, "n_threads")
        check_positive_int(self.n_partitions, "n_partitions")
        X, W = check_compatible(X, self.kernels)
        self.layer_ = LayerConfig.from_arrays(X, W)
        self.choice_ = select_strategy(self.layer_, self._resolve_weights())
        self.strategy_ = self.choice_.strategy if self.strategy == "auto" else Strategy.parse(self.strategy)
        self.kernels_ = W
        self.khat_ = lower_kernels(W, self.strategy_)
        self.n_features_in_ = int(np.prod(X.shape[1:]))
        return self

    def transform(self, X):
        """Return the ``(b, o, m, m)`` convolution of a ``(b, n, n, d)`` batch."""
        check_is_fitted(self, "strategy_")
        X = check_batch(X)
        if X.shape[1:] != (self.layer_.n, self.layer_.n, self.layer_.d):
            raise ConfigurationError(
                f"fitted on images of shape {(self.layer_.n, self.layer_.n, self.layer_.d)}, got {X.shape[1:]}"
            )
        b = X.shape[0]
        p = min(self.n_partitions, b, self.n_threads)
        plan = plan_partitions(b, self.n_threads, p)
        out, self.timings_, self.footprint_ = execute_partitioned(X, self.kernels_, self.strategy_, plan)
        return out

    def _more_tags(self):
        return {"stateless": False, "requires_fit": True}
