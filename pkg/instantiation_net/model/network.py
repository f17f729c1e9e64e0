"""End-to-end image -> mesh network: encoder, two-layer FC bridge, spectral GCN decoder."""
import logging

import numpy as np

from instantiation_net.autodiff import ops
from instantiation_net.autodiff.tensor import Tensor
from instantiation_net.exceptions import ConfigurationError
from instantiation_net.graph.mesh import Mesh
from instantiation_net.graph.spectral import cheb_conv
from instantiation_net.model.encoder import (
    BATCH_STATS,
    RUNNING_STATS,
    TRAINING,
    NormPolicy,
    encode,
    encoder_output_shape,
    tile_channels,
)
from instantiation_net.model.params import BOTTLENECK_FEATURES, OUTPUT_CHANNELS, ModelParams
from instantiation_net.sampling.hierarchy import upsample
from instantiation_net.schemes.config import BatchNormEvalMode, ModelConfig
from instantiation_net.schemes.report import LayerCount, ParameterCount

logger = logging.getLogger(__name__)


def norm_policy(params: ModelParams, training: bool) -> NormPolicy:
    if training:
        return TRAINING
    if params.config.bn_eval_mode is BatchNormEvalMode.BATCH:
        return BATCH_STATS
    return RUNNING_STATS


def forward(image: np.ndarray, params: ModelParams, training: bool = False) -> Tensor:
    """H x W x 1 image -> M x 3 vertex coordinates of the template's finest level."""
    encoder = params.config.encoder
    tiled = tile_channels(image)
    if tiled.shape[:2] != (encoder.input_height, encoder.input_width):
        raise ConfigurationError(
            f'image is {tiled.shape[0]}x{tiled.shape[1]}, model expects '
            f'{encoder.input_height}x{encoder.input_width}'
        )
    t = params.tensors
    hierarchy = params.hierarchy

    features = encode(Tensor(tiled[None]), encoder, t, params.buffers, norm_policy(params, training))
    h = ops.fully_connected(features, t['fc1.weight'], t['fc1.bias'])
    h = ops.fully_connected(h, t['fc2.weight'], t['fc2.bias'])
    v = ops.reshape(h, (hierarchy.level_counts[-1], params.config.feature_channels))

    levels = params.config.levels
    for stage in range(1, levels + 1):
        level = levels - stage
        v = upsample(hierarchy.up_maps[level], v)
        v = cheb_conv(params.gcn_layer(stage), hierarchy.bundles[level], v)
        if stage < levels:
            v = ops.relu(v)
    return v


def predict_mesh(image: np.ndarray, params: ModelParams) -> Mesh:
    vertices = forward(image, params, training=False).numpy()
    return params.template.with_vertices(vertices)


def shape_trace(params: ModelParams) -> list[tuple[str, tuple[int, ...]]]:
    return trace_shapes(params.config, params.hierarchy.level_counts)


def trace_shapes(config: ModelConfig, counts: list[int]) -> list[tuple[str, tuple[int, ...]]]:
    """Stage-by-stage tensor shapes of the forward pass, derived from the configuration."""
    f = config.feature_channels
    trace = [
        ('image', (config.encoder.input_height, config.encoder.input_width, 1)),
        ('tiled', (config.encoder.input_height, config.encoder.input_width, 3)),
        ('encoder', encoder_output_shape(config.encoder)),
        ('fc1', (BOTTLENECK_FEATURES,)),
        ('fc2', (counts[-1] * f,)),
        ('reshape', (counts[-1], f)),
    ]
    for stage in range(1, config.levels + 1):
        level = config.levels - stage
        fout = OUTPUT_CHANNELS if stage == config.levels else f
        trace.append((f'upsample{stage}', (counts[level], f)))
        trace.append((f'gcn{stage}', (counts[level], fout)))
    return trace


def count_parameters(params: ModelParams) -> ParameterCount:
    layers = []
    encoder_weights = sum(t.size for name, t in params.tensors.items() if name.startswith('encoder.'))
    layers.append(LayerCount(name='encoder', filter_params=encoder_weights, note='kernels and batch-norm scale/shift'))
    for fc in ('fc1', 'fc2'):
        layers.append(LayerCount(
            name=fc,
            filter_params=params.tensors[f'{fc}.weight'].size,
            bias_params=params.tensors[f'{fc}.bias'].size,
        ))
    for index, layer in enumerate(params.gcn_layers, start=1):
        filters, biases = layer.parameter_count()
        layers.append(LayerCount(
            name=f'gcn{index}', filter_params=filters, bias_params=biases,
            note='bias is an addition to the Fin*Fout*K filter count',
        ))
    total = sum(layer.filter_params + layer.bias_params for layer in layers)
    return ParameterCount(layers=layers, total=total)
