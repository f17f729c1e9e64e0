import numpy as np

from instantiation_net.autodiff import ops
from instantiation_net.autodiff.tensor import Tensor
from instantiation_net.exceptions import DimensionError


def _check_pair(pred_shape, truth_shape, what: str) -> None:
    if tuple(pred_shape) != tuple(truth_shape):
        raise DimensionError(f'{what}: prediction {tuple(pred_shape)} and truth {tuple(truth_shape)} differ')


def l1_loss(pred: Tensor, truth) -> Tensor:
    """Mean absolute coordinate error over all 3M coordinates."""
    truth = ops.as_tensor(truth)
    _check_pair(pred.shape, truth.shape, 'l1_loss')
    return ops.mean(ops.absolute(ops.sub(pred, truth)))


def per_vertex_error(pred, truth) -> np.ndarray:
    """Euclidean distance between corresponding vertices, in mm."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    _check_pair(pred.shape, truth.shape, 'per_vertex_error')
    return np.linalg.norm(pred - truth, axis=1)


def distance_error(pred, truth) -> float:
    """Mean 3D distance error over vertices, in mm."""
    return float(per_vertex_error(pred, truth).mean())
