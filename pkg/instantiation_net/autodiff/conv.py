"""Image layers on NHWC tensors: convolution, pooling and batch normalisation."""
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from instantiation_net.autodiff.tensor import Tensor
from instantiation_net.exceptions import DimensionError

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


class Padding(str, Enum):
    SAME = 'same'
    VALID = 'valid'


class PoolMode(str, Enum):
    MAX = 'max'
    AVERAGE = 'average'


class NormMode(str, Enum):
    TRAIN = 'train'
    INFER = 'infer'


def output_size(size: int, kernel: int, stride: int, padding: Padding) -> tuple[int, int, int]:
    """Output length and (before, after) padding for one spatial axis."""
    if kernel < 1 or stride < 1:
        raise DimensionError(f'kernel {kernel} and stride {stride} must be positive')
    if Padding(padding) is Padding.SAME:
        out = -(-size // stride)
        total = max((out - 1) * stride + kernel - size, 0)
        return out, total // 2, total - total // 2
    if kernel > size:
        raise DimensionError(f'kernel {kernel} is larger than input extent {size}')
    return (size - kernel) // stride + 1, 0, 0


def _window(array: np.ndarray, i: int, j: int, stride: int, out_h: int, out_w: int) -> np.ndarray:
    return array[:, i:i + stride * (out_h - 1) + 1:stride, j:j + stride * (out_w - 1) + 1:stride, :]


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, padding: Padding = Padding.SAME) -> Tensor:
    """Cross-correlation of an N x H x W x Cin input with a Cin x K x K x Cout kernel."""
    if x.ndim != 4 or kernel.ndim != 4:
        raise DimensionError(f'conv2d expects NHWC input and CKKC kernel, got {x.shape} and {kernel.shape}')
    n, h, w, cin = x.shape
    kcin, k, k2, cout = kernel.shape
    if kcin != cin or k != k2:
        raise DimensionError(f'conv2d: kernel {kernel.shape} does not fit input channels of {x.shape}')
    out_h, top, bottom = output_size(h, k, stride, padding)
    out_w, left, right = output_size(w, k, stride, padding)
    xp = np.pad(x.data, ((0, 0), (top, bottom), (left, right), (0, 0)))
    weights = kernel.data

    out = np.zeros((n, out_h, out_w, cout))
    for i in range(k):
        for j in range(k):
            out += _window(xp, i, j, stride, out_h, out_w) @ weights[:, i, j, :]

    def backward(g):
        gxp = np.zeros_like(xp)
        gk = np.zeros_like(weights)
        for i in range(k):
            for j in range(k):
                patch = _window(xp, i, j, stride, out_h, out_w)
                gk[:, i, j, :] = np.tensordot(patch, g, axes=([0, 1, 2], [0, 1, 2]))
                _window(gxp, i, j, stride, out_h, out_w)[...] += g @ weights[:, i, j, :].T
        return gxp[:, top:top + h, left:left + w, :], gk

    return Tensor.from_op(out, (x, kernel), backward, 'conv2d')


def pool2d(x: Tensor, kernel: int, mode: PoolMode = PoolMode.MAX, stride: int | None = None,
           padding: Padding = Padding.VALID) -> Tensor:
    """K x K pooling; the stride defaults to K.

    Max pooling routes the gradient to the first maximum in row-major window order;
    average pooling divides by K*K, counting zero padding.
    """
    if x.ndim != 4:
        raise DimensionError(f'pool2d expects an NHWC input, got {x.shape}')
    mode = PoolMode(mode)
    stride = kernel if stride is None else stride
    n, h, w, c = x.shape
    if Padding(padding) is Padding.VALID and (kernel > h or kernel > w):
        raise DimensionError(f'pool2d: kernel {kernel} exceeds input {h}x{w}')
    out_h, top, bottom = output_size(h, kernel, stride, padding)
    out_w, left, right = output_size(w, kernel, stride, padding)
    fill = -np.inf if mode is PoolMode.MAX else 0.0
    xp = np.pad(x.data, ((0, 0), (top, bottom), (left, right), (0, 0)), constant_values=fill)

    if mode is PoolMode.AVERAGE:
        out = np.zeros((n, out_h, out_w, c))
        for i in range(kernel):
            for j in range(kernel):
                out += _window(xp, i, j, stride, out_h, out_w)
        out /= kernel * kernel

        def backward(g):
            gxp = np.zeros_like(xp)
            share = g / (kernel * kernel)
            for i in range(kernel):
                for j in range(kernel):
                    _window(gxp, i, j, stride, out_h, out_w)[...] += share
            return (gxp[:, top:top + h, left:left + w, :],)

        return Tensor.from_op(out, (x,), backward, 'pool2d')

    windows = sliding_window_view(xp, (kernel, kernel), axis=(1, 2))[:, ::stride, ::stride][:, :out_h, :out_w]
    flat = windows.reshape(n, out_h, out_w, c, kernel * kernel)
    arg = np.argmax(flat, axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def backward(g):
        gxp = np.zeros_like(xp)
        di, dj = np.divmod(arg, kernel)
        nn, oh, ow, cc = np.indices(arg.shape)
        np.add.at(gxp, (nn, oh * stride + di, ow * stride + dj, cc), g)
        return (gxp[:, top:top + h, left:left + w, :],)

    return Tensor.from_op(out, (x,), backward, 'pool2d')


@dataclass
class BatchNormStats:
    """Running per-channel statistics, updated in place during training."""
    mean: np.ndarray
    var: np.ndarray
    momentum: float = BN_MOMENTUM

    @classmethod
    def fresh(cls, channels: int) -> 'BatchNormStats':
        return cls(mean=np.zeros(channels), var=np.ones(channels))


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, stats: BatchNormStats | None = None,
               mode: NormMode = NormMode.TRAIN, eps: float = BN_EPS) -> Tensor:
    """Per-channel normalisation over the N, H and W axes, then scale and shift."""
    if eps <= 0:
        raise DimensionError(f'batch_norm eps must be positive, got {eps}')
    c = x.shape[-1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise DimensionError(f'batch_norm: gamma {gamma.shape} / beta {beta.shape} do not match {c} channels')
    axes = tuple(range(x.ndim - 1))
    mode = NormMode(mode)
    if mode is NormMode.TRAIN:
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        if stats is not None:
            stats.mean[...] = stats.momentum * stats.mean + (1 - stats.momentum) * mu
            stats.var[...] = stats.momentum * stats.var + (1 - stats.momentum) * var
    else:
        if stats is None:
            raise DimensionError('batch_norm in infer mode needs running statistics')
        mu, var = stats.mean.copy(), stats.var.copy()
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x.data - mu) * inv_std
    out = x_hat * gamma.data + beta.data
    m = x.data.size // c

    def backward(g):
        g_gamma = np.sum(g * x_hat, axis=axes)
        g_beta = np.sum(g, axis=axes)
        g_hat = g * gamma.data
        if mode is NormMode.INFER:
            return g_hat * inv_std, g_gamma, g_beta
        gx = inv_std / m * (m * g_hat - g_hat.sum(axis=axes) - x_hat * np.sum(g_hat * x_hat, axis=axes))
        return gx, g_gamma, g_beta

    return Tensor.from_op(out, (x, gamma, beta), backward, 'batch_norm')
