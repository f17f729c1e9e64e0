import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from instantiation_net.autodiff.checkpoint import load_checkpoint, save_checkpoint
from instantiation_net.autodiff.conv import BatchNormStats
from instantiation_net.autodiff.init import glorot_uniform, zeros
from instantiation_net.autodiff.tensor import Tensor
from instantiation_net.exceptions import ConfigurationError
from instantiation_net.graph.mesh import Mesh
from instantiation_net.graph.spectral import ChebConvLayer
from instantiation_net.model.encoder import encoder_output_shape, init_encoder
from instantiation_net.sampling.hierarchy import SamplingHierarchy
from instantiation_net.schemes.config import ModelConfig

logger = logging.getLogger(__name__)

BOTTLENECK_FEATURES = 8
OUTPUT_CHANNELS = 3


@dataclass
class ModelParams:
    """Trainable tensors (in registration order), batch-norm buffers and the fixed geometry."""
    tensors: dict[str, Tensor]
    buffers: dict[str, BatchNormStats]
    config: ModelConfig
    hierarchy: SamplingHierarchy
    template: Mesh

    def trainable(self) -> list[tuple[str, Tensor]]:
        return list(self.tensors.items())

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.zero_grad()

    def num_parameters(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def gcn_layer(self, index: int) -> ChebConvLayer:
        return ChebConvLayer(theta=self.tensors[f'gcn.layer{index}.theta'],
                             bias=self.tensors[f'gcn.layer{index}.bias'])

    @property
    def gcn_layers(self) -> list[ChebConvLayer]:
        return [self.gcn_layer(i) for i in range(1, self.config.levels + 1)]


def check_geometry(config: ModelConfig, hierarchy: SamplingHierarchy, template: Mesh) -> None:
    if hierarchy.stride != config.stride:
        raise ConfigurationError(f'hierarchy stride {hierarchy.stride} does not match model stride {config.stride}')
    if hierarchy.depth != config.levels:
        raise ConfigurationError(f'hierarchy has {hierarchy.depth} levels, model expects {config.levels}')
    if template.content_hash() != hierarchy.template_hash:
        raise ConfigurationError('template mesh is not the one the hierarchy was built from')


def init_params(config: ModelConfig, hierarchy: SamplingHierarchy, template: Mesh,
                rng: np.random.Generator) -> ModelParams:
    check_geometry(config, hierarchy, template)
    tensors: dict[str, Tensor] = {}
    buffers: dict[str, BatchNormStats] = {}
    init_encoder(config.encoder, rng, tensors, buffers)

    flat = int(np.prod(encoder_output_shape(config.encoder)[1:]))
    coarse = hierarchy.level_counts[-1] * config.feature_channels
    tensors['fc1.weight'] = glorot_uniform((flat, BOTTLENECK_FEATURES), flat, BOTTLENECK_FEATURES, rng, 'fc1.weight')
    tensors['fc1.bias'] = zeros((BOTTLENECK_FEATURES,), 'fc1.bias')
    tensors['fc2.weight'] = glorot_uniform((BOTTLENECK_FEATURES, coarse), BOTTLENECK_FEATURES, coarse, rng,
                                           'fc2.weight')
    tensors['fc2.bias'] = zeros((coarse,), 'fc2.bias')

    for index in range(1, config.levels + 1):
        fout = OUTPUT_CHANNELS if index == config.levels else config.feature_channels
        layer = ChebConvLayer.create(config.feature_channels, fout, config.cheb_order, rng, name=f'gcn.layer{index}')
        tensors[f'gcn.layer{index}.theta'] = layer.theta
        tensors[f'gcn.layer{index}.bias'] = layer.bias

    params = ModelParams(tensors=tensors, buffers=buffers, config=config, hierarchy=hierarchy, template=template)
    logger.debug('model initialised tensors=%d parameters=%d', len(tensors), params.num_parameters())
    return params


def save_model(path: Path, params: ModelParams) -> None:
    arrays = {name: ('trainable', t.data) for name, t in params.tensors.items()}
    for name, stats in params.buffers.items():
        arrays[f'{name}.running_mean'] = ('buffer', stats.mean)
        arrays[f'{name}.running_var'] = ('buffer', stats.var)
    save_checkpoint(
        path,
        arrays,
        model=params.config,
        template_hash=params.hierarchy.template_hash,
        level_counts=params.hierarchy.level_counts,
    )


def load_model(path: Path, hierarchy: SamplingHierarchy) -> ModelParams:
    """Restore a checkpoint onto `hierarchy`; any geometry mismatch is a ConfigurationError."""
    manifest, arrays = load_checkpoint(path)
    if manifest.template_hash != hierarchy.template_hash:
        raise ConfigurationError(f'{path}: checkpoint was trained on a different template mesh')
    if manifest.level_counts != hierarchy.level_counts:
        raise ConfigurationError(
            f'{path}: checkpoint level counts {manifest.level_counts} do not match hierarchy {hierarchy.level_counts}'
        )
    params = init_params(manifest.model, hierarchy, hierarchy.levels[0], np.random.default_rng(0))
    expected = set(params.tensors) | {f'{n}.running_{s}' for n in params.buffers for s in ('mean', 'var')}
    if set(arrays) != expected:
        missing = sorted(expected - set(arrays))[:3]
        extra = sorted(set(arrays) - expected)[:3]
        raise ConfigurationError(f'{path}: tensor names differ (missing {missing}, unexpected {extra})')
    for name, t in params.tensors.items():
        if arrays[name].shape != t.shape:
            raise ConfigurationError(f'{path}: {name} has shape {arrays[name].shape}, expected {t.shape}')
        t.data[...] = arrays[name]
    for name, stats in params.buffers.items():
        mean, var = arrays[f'{name}.running_mean'], arrays[f'{name}.running_var']
        if mean.shape != stats.mean.shape or var.shape != stats.var.shape:
            raise ConfigurationError(f'{path}: running statistics of {name} have shape {mean.shape}, '
                                     f'expected {stats.mean.shape}')
        stats.mean[...] = mean
        stats.var[...] = var
    return params
