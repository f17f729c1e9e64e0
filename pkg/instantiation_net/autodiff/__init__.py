from instantiation_net.autodiff.conv import (
    BatchNormStats,
    NormMode,
    Padding,
    PoolMode,
    batch_norm,
    conv2d,
    pool2d,
)
from instantiation_net.autodiff.ops import (
    absolute,
    add,
    concat,
    fully_connected,
    matmul,
    mean,
    relu,
    reshape,
    sparse_matmul,
    weighted_sum,
)
from instantiation_net.autodiff.tensor import ComputationTape, Tensor, backward

__all__ = [
    'BatchNormStats', 'ComputationTape', 'NormMode', 'Padding', 'PoolMode', 'Tensor',
    'absolute', 'add', 'backward', 'batch_norm', 'concat', 'conv2d', 'fully_connected',
    'matmul', 'mean', 'pool2d', 'relu', 'reshape', 'sparse_matmul', 'weighted_sum',
]
