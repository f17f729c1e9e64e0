"""Dense-block image encoder.

    conv0 7x7/2 -> norm0 -> relu -> maxpool 3x3/2
    4 dense blocks, each layer: norm1 -> relu -> conv1 1x1 -> norm2 -> relu -> conv2 3x3, concatenated
    transitions after blocks 1-3: norm -> relu -> 1x1 conv (channels * compression, floored) -> avgpool 2x2
    norm5 -> relu

Convolutions carry no bias; batch normalisation follows each of them.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from instantiation_net.autodiff import ops
from instantiation_net.autodiff.conv import BatchNormStats, NormMode, Padding, PoolMode, batch_norm, conv2d, pool2d
from instantiation_net.autodiff.init import conv_kernel, ones, zeros
from instantiation_net.autodiff.tensor import Tensor
from instantiation_net.exceptions import ConfigurationError, DimensionError
from instantiation_net.schemes.config import EncoderConfig

logger = logging.getLogger(__name__)

DOWNSAMPLING = 32


@dataclass(frozen=True)
class NormPolicy:
    """Which statistics batch normalisation uses and whether running stats are updated."""
    mode: NormMode
    track: bool

    @property
    def uses_buffers(self) -> bool:
        return self.track or self.mode is NormMode.INFER


TRAINING = NormPolicy(NormMode.TRAIN, track=True)
RUNNING_STATS = NormPolicy(NormMode.INFER, track=False)
BATCH_STATS = NormPolicy(NormMode.TRAIN, track=False)


def tile_channels(image: np.ndarray) -> np.ndarray:
    """H x W x 1 grayscale -> H x W x 3 with three identical channels."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        image = image[:, :, None]
    if image.ndim != 3 or image.shape[2] != 1:
        raise DimensionError(f'tile_channels expects an H x W x 1 image, got {image.shape}')
    return np.repeat(image, 3, axis=2)


def trace_encoder_channels(config: EncoderConfig) -> list[tuple[str, int]]:
    """Channel count after each stage, computed without running any convolution."""
    channels = config.initial_channels
    trace = [('conv0', channels)]
    for block, length in enumerate(config.block_lengths, start=1):
        channels += length * config.growth_rate
        trace.append((f'block{block}', channels))
        if block < len(config.block_lengths):
            channels = math.floor(channels * config.compression)
            if channels < 1:
                raise ConfigurationError(f'transition{block} compresses to zero channels')
            trace.append((f'transition{block}', channels))
    return trace


def encoder_output_shape(config: EncoderConfig) -> tuple[int, int, int, int]:
    return (1, config.input_height // DOWNSAMPLING, config.input_width // DOWNSAMPLING,
            trace_encoder_channels(config)[-1][1])


def _add_norm(name: str, channels: int, tensors: dict, buffers: dict) -> None:
    tensors[f'{name}.gamma'] = ones((channels,), name=f'{name}.gamma')
    tensors[f'{name}.beta'] = zeros((channels,), name=f'{name}.beta')
    buffers[name] = BatchNormStats.fresh(channels)


def _add_conv(name: str, cin: int, kernel: int, cout: int, rng: np.random.Generator, tensors: dict) -> None:
    tensors[f'{name}.kernel'] = conv_kernel(cin, kernel, cout, rng, name=f'{name}.kernel')


def init_encoder(config: EncoderConfig, rng: np.random.Generator, tensors: dict[str, Tensor],
                 buffers: dict[str, BatchNormStats], prefix: str = 'encoder') -> int:
    """Register encoder parameters in order; returns the output channel count."""
    channels = config.initial_channels
    _add_conv(f'{prefix}.conv0', 3, 7, channels, rng, tensors)
    _add_norm(f'{prefix}.norm0', channels, tensors, buffers)
    bottleneck = config.bottleneck_factor * config.growth_rate
    for block, length in enumerate(config.block_lengths, start=1):
        for layer in range(1, length + 1):
            name = f'{prefix}.block{block}.layer{layer}'
            _add_norm(f'{name}.norm1', channels, tensors, buffers)
            _add_conv(f'{name}.conv1', channels, 1, bottleneck, rng, tensors)
            _add_norm(f'{name}.norm2', bottleneck, tensors, buffers)
            _add_conv(f'{name}.conv2', bottleneck, 3, config.growth_rate, rng, tensors)
            channels += config.growth_rate
        if block < len(config.block_lengths):
            name = f'{prefix}.transition{block}'
            reduced = math.floor(channels * config.compression)
            _add_norm(f'{name}.norm', channels, tensors, buffers)
            _add_conv(f'{name}.conv', channels, 1, reduced, rng, tensors)
            channels = reduced
    _add_norm(f'{prefix}.norm5', channels, tensors, buffers)
    return channels


def _norm_relu(x: Tensor, name: str, tensors, buffers, policy: NormPolicy) -> Tensor:
    stats = buffers[name] if policy.uses_buffers else None
    return ops.relu(batch_norm(x, tensors[f'{name}.gamma'], tensors[f'{name}.beta'], stats, policy.mode))


def encode(x: Tensor, config: EncoderConfig, tensors: dict[str, Tensor], buffers: dict[str, BatchNormStats],
           policy: NormPolicy = TRAINING, prefix: str = 'encoder') -> Tensor:
    """N x H x W x 3 -> N x H/32 x W/32 x C."""
    if x.ndim != 4 or x.shape[3] != 3:
        raise DimensionError(f'encode expects an N x H x W x 3 input, got {x.shape}')
    if x.shape[1] % DOWNSAMPLING or x.shape[2] % DOWNSAMPLING:
        raise ConfigurationError(f'input {x.shape[1]}x{x.shape[2]} is not divisible by {DOWNSAMPLING}')

    h = conv2d(x, tensors[f'{prefix}.conv0.kernel'], stride=2, padding=Padding.SAME)
    h = _norm_relu(h, f'{prefix}.norm0', tensors, buffers, policy)
    h = pool2d(h, 3, PoolMode.MAX, stride=2, padding=Padding.SAME)
    for block, length in enumerate(config.block_lengths, start=1):
        for layer in range(1, length + 1):
            name = f'{prefix}.block{block}.layer{layer}'
            y = _norm_relu(h, f'{name}.norm1', tensors, buffers, policy)
            y = conv2d(y, tensors[f'{name}.conv1.kernel'])
            y = _norm_relu(y, f'{name}.norm2', tensors, buffers, policy)
            y = conv2d(y, tensors[f'{name}.conv2.kernel'])
            h = ops.concat([h, y])
        if block < len(config.block_lengths):
            name = f'{prefix}.transition{block}'
            h = _norm_relu(h, f'{name}.norm', tensors, buffers, policy)
            h = conv2d(h, tensors[f'{name}.conv.kernel'])
            h = pool2d(h, 2, PoolMode.AVERAGE, padding=Padding.SAME)
        logger.debug('encoder block=%d shape=%s', block, h.shape)
    return _norm_relu(h, f'{prefix}.norm5', tensors, buffers, policy)
