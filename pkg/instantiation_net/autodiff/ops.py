"""Elementwise, linear and structural operations on `Tensor`.

Broadcasting is limited to what numpy does for a scalar or a trailing-axis bias;
gradients are summed back to the input shape.
"""
import numpy as np
import scipy.sparse

from instantiation_net.autodiff.tensor import Tensor
from instantiation_net.exceptions import DimensionError


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f'{op}: shapes {a.shape} and {b.shape} do not broadcast') from None


def add(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, 'add')

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor.from_op(a.data + b.data, (a, b), backward, 'add')


def sub(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, 'sub')

    def backward(g):
        return _unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)

    return Tensor.from_op(a.data - b.data, (a, b), backward, 'sub')


def neg(a: Tensor) -> Tensor:
    return Tensor.from_op(-a.data, (a,), lambda g: (-g,), 'neg')


def mul(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, 'mul')

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor.from_op(a.data * b.data, (a, b), backward, 'mul')


def power(a: Tensor, exponent: int) -> Tensor:
    if int(exponent) != exponent or exponent < 1:
        raise DimensionError(f'power supports positive integer exponents, got {exponent}')
    exponent = int(exponent)

    def backward(g):
        return (g * exponent * a.data ** (exponent - 1),)

    return Tensor.from_op(a.data ** exponent, (a,), backward, 'power')


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of an m x k and a k x n tensor."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f'matmul: cannot multiply {a.shape} by {b.shape}')

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return Tensor.from_op(a.data @ b.data, (a, b), backward, 'matmul')


def sparse_matmul(matrix: scipy.sparse.spmatrix, x: Tensor) -> Tensor:
    """Product of a constant sparse matrix with a dense 2-D tensor."""
    if x.ndim != 2 or matrix.shape[1] != x.shape[0]:
        raise DimensionError(f'sparse_matmul: cannot multiply {matrix.shape} by {x.shape}')
    transposed = matrix.T.tocsr()

    def backward(g):
        return (np.asarray(transposed @ g),)

    return Tensor.from_op(np.asarray(matrix @ x.data), (x,), backward, 'sparse_matmul')


def sum(a: Tensor) -> Tensor:  # noqa: A001
    return Tensor.from_op(np.sum(a.data), (a,), lambda g: (np.full(a.shape, float(g)),), 'sum')


def mean(a: Tensor) -> Tensor:
    n = a.size
    return Tensor.from_op(np.mean(a.data), (a,), lambda g: (np.full(a.shape, float(g) / n),), 'mean')


def weighted_sum(a: Tensor, weights: np.ndarray) -> Tensor:
    """Scalar `sum(a * weights)` for a constant weight array of the same shape."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != a.shape:
        raise DimensionError(f'weighted_sum: weights {weights.shape} do not match {a.shape}')
    return Tensor.from_op(np.sum(a.data * weights), (a,), lambda g: (float(g) * weights,), 'weighted_sum')


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise DimensionError(f'reshape: cannot view {a.shape} as {shape}') from None
    return Tensor.from_op(out, (a,), lambda g: (g.reshape(a.shape),), 'reshape')


def flatten(a: Tensor) -> Tensor:
    """Collapse every axis but the first: N x ... -> N x D."""
    return reshape(a, (a.shape[0], -1))


def concat(tensors: list[Tensor]) -> Tensor:
    """Concatenate along the last axis (the channel axis of NHWC feature maps)."""
    leading = {t.shape[:-1] for t in tensors}
    if len(leading) != 1:
        raise DimensionError(f'concat: leading shapes differ {sorted(leading)}')
    splits = np.cumsum([t.shape[-1] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=-1))

    return Tensor.from_op(np.concatenate([t.data for t in tensors], axis=-1), tensors, backward, 'concat')


def relu(a: Tensor) -> Tensor:
    """max(0, x); the subgradient at exactly 0 is 0."""
    mask = a.data > 0

    def backward(g):
        return (g * mask,)

    return Tensor.from_op(np.where(mask, a.data, 0.0), (a,), backward, 'relu')


def absolute(a: Tensor) -> Tensor:
    """|x| with sign subgradient, 0 at exactly 0."""
    sign = np.sign(a.data)
    return Tensor.from_op(np.abs(a.data), (a,), lambda g: (g * sign,), 'absolute')


def fully_connected(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map `flatten(x) @ weight + bias`."""
    flat = flatten(x) if x.ndim != 2 else x
    if flat.shape[1] != weight.shape[0] or weight.ndim != 2:
        raise DimensionError(
            f'fully_connected: input of {flat.shape[1]} features does not match weight {weight.shape}'
        )
    if bias.shape != (weight.shape[1],):
        raise DimensionError(f'fully_connected: bias {bias.shape} does not match weight {weight.shape}')
    return add(matmul(flat, weight), bias)
