from enum import Enum

from pydantic import BaseModel, Field

from instantiation_net.schemes.config import ModelConfig
from instantiation_net.schemes.shape import ShapeCycleSpec


class FoldStatus(str, Enum):
    OK = 'ok'
    DIVERGED = 'diverged'


class FoldResult(BaseModel):
    fold_index: int
    frame_index: int
    frames_trained: int
    final_l1: float
    distance_error_mm: float
    baseline_error_mm: float
    wall_seconds: float = 0.0
    train_checksum: str = ''
    status: FoldStatus = FoldStatus.OK
    message: str = ''


class LeaveOneOutSummary(BaseModel):
    folds: int
    completed: int
    mean_error_mm: float
    mean_baseline_error_mm: float
    improvement: float = Field(description='relative reduction of the mean error against the baseline')
    fraction_better: float
    worst_frames: list[int] = []


class LeaveOneOutReport(BaseModel):
    folds: list[FoldResult]
    summary: LeaveOneOutSummary


class CheckResult(BaseModel):
    name: str
    passed: bool
    max_error: float
    tolerance: float
    detail: str = ''


class BoundaryRun(BaseModel):
    """One seeded leave-one-out repetition ranked by fold error."""
    seed: int
    worst_frames: list[int]
    extremes_on_top: bool


class BoundaryReport(BaseModel):
    extreme_frames: list[int]
    runs: list[BoundaryRun]
    check: CheckResult


class LayerCount(BaseModel):
    name: str
    filter_params: int
    bias_params: int = 0
    note: str = ''


class ParameterCount(BaseModel):
    layers: list[LayerCount]
    total: int


class TensorEntry(BaseModel):
    name: str
    kind: str = Field(pattern='^(trainable|buffer)$')
    shape: list[int]
    offset: int


class CheckpointManifest(BaseModel):
    version: int = 1
    entries: list[TensorEntry]
    model: ModelConfig
    template_hash: str
    level_counts: list[int]
    reshape_order: str = 'vertex-major'


class DatasetManifest(BaseModel):
    spec: ShapeCycleSpec
    seed: int
    frames: int
    checksums: dict[str, str]
