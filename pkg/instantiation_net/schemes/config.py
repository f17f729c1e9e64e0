from enum import Enum
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class BatchNormEvalMode(str, Enum):
    RUNNING = 'running'
    BATCH = 'batch'


class EncoderConfig(BaseModel):
    """Dense-block image encoder geometry.

    - `block_lengths`: number of 1x1+3x3 layer pairs in each of the four dense blocks.
    - `compression`: channel factor applied by each transition layer (floored).
    - `input_height` / `input_width`: must both be multiples of 32.
    """
    model_config = ConfigDict(extra='forbid')

    growth_rate: int = Field(8, ge=1)
    block_lengths: tuple[int, int, int, int] = (2, 2, 2, 2)
    initial_channels: int = Field(16, ge=1)
    compression: float = Field(0.5, gt=0, le=1)
    bottleneck_factor: int = Field(4, ge=1)
    input_height: int = Field(64, ge=32)
    input_width: int = Field(64, ge=32)

    @field_validator('block_lengths', mode='before')
    @classmethod
    def split_block_lengths(cls, v):
        if isinstance(v, str):
            return tuple(int(part) for part in v.split(',') if part.strip())
        return v

    @field_validator('block_lengths')
    @classmethod
    def blocks_not_empty(cls, v: tuple[int, int, int, int]):
        if any(length < 1 for length in v):
            raise ValueError('every dense block needs at least one layer')
        return v

    @model_validator(mode='after')
    def input_divisible_by_32(self):
        if self.input_height % 32 or self.input_width % 32:
            raise ValueError(
                f'input {self.input_height}x{self.input_width} is not divisible by 32'
            )
        return self


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    lr0: float = Field(5e-3, gt=0)
    decay: float = Field(0.97, gt=0, lt=1)
    decay_period_frames: int = Field(5, ge=1, description='learning rate decays every this many x frame-count steps')
    momentum: float = Field(0.9, ge=0, lt=1)
    max_epochs: int = Field(1200, ge=1)
    seed: int = Field(0, ge=0)
    cheb_order: int = Field(3, ge=1, description='Chebyshev polynomial order K')
    feature_channels: int = Field(64, ge=1, description='GCN feature channels F')
    stride: int = Field(4, ge=2, description='mesh down-sampling stride S')
    log_every: int = Field(50, ge=1)
    workers: int = Field(1, ge=1)

    def decay_every(self, n_frames: int) -> int:
        return self.decay_period_frames * n_frames


class HierarchyConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    levels: int = Field(4, ge=1)


class ModelConfig(BaseModel):
    """Everything needed to rebuild a network around a sampling hierarchy."""
    model_config = ConfigDict(extra='forbid')

    encoder: EncoderConfig = EncoderConfig()
    feature_channels: int = Field(16, ge=1)
    cheb_order: int = Field(3, ge=1)
    stride: int = Field(3, ge=2)
    levels: int = Field(4, ge=1)
    bn_eval_mode: BatchNormEvalMode = BatchNormEvalMode.RUNNING

    @classmethod
    def from_parts(cls, train: TrainConfig, encoder: EncoderConfig, hierarchy: HierarchyConfig,
                   bn_eval_mode: BatchNormEvalMode = BatchNormEvalMode.RUNNING) -> 'ModelConfig':
        return cls(
            encoder=encoder,
            feature_channels=train.feature_channels,
            cheb_order=train.cheb_order,
            stride=train.stride,
            levels=hierarchy.levels,
            bn_eval_mode=bn_eval_mode,
        )


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    dataset_dir: Path
    output_dir: Path
    encoder_preset: str | None = None
    decoder_preset: str | None = None
    bn_eval_mode: BatchNormEvalMode = BatchNormEvalMode.RUNNING
    reproducible: bool = False
    train: TrainConfig = TrainConfig()
    encoder: EncoderConfig = EncoderConfig()
    hierarchy: HierarchyConfig = HierarchyConfig()

    def build_model_config(self) -> ModelConfig:
        return ModelConfig.from_parts(self.train, self.encoder, self.hierarchy, self.bn_eval_mode)
