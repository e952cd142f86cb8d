"""Convolution by lowering to matrix multiplication, with cost-based layout selection."""
from ._validation import ConfigurationError
from .batching import FootprintReport, PartitionPlan, execute_partitioned, execute_per_image, footprint, plan_partitions
from .cost import (
    CostEstimate, CostWeights, StrategyChoice, calibrate_weights, crossover_ratio, estimate, select_strategy,
    with_measured_efficiency,
)
from .estimator import LoweredConv2D
from .gemm import GemmConfig, gemm_throughput_probe, multiply, multiply_reference
from .lowering import LoweredMatrices, OpCounter, PhaseTimings, Strategy, convolve_lowered, lift, lower
from .scheduler import (
    DeviceProfile,
    SplitPlan,
    heuristic_gap,
    optimal_split_sweep,
    proportional_split,
    simulate_makespan,
)
from .tensor import LayerConfig, direct_convolve, direct_convolve_batch

__version__ = "0.1.0"
