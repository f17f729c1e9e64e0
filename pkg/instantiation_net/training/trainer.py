"""Per-fold training and the leave-one-out driver."""
import hashlib
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from instantiation_net.autodiff.tensor import backward
from instantiation_net.exceptions import DimensionError, DivergenceError, LeakageError, NumericalError
from instantiation_net.graph.mesh import Mesh
from instantiation_net.model.network import forward, predict_mesh
from instantiation_net.model.params import ModelParams, init_params
from instantiation_net.sampling.hierarchy import SamplingHierarchy
from instantiation_net.schemes.config import ModelConfig, TrainConfig
from instantiation_net.schemes.report import FoldResult, FoldStatus, LeaveOneOutReport, LeaveOneOutSummary
from instantiation_net.training.dataset import DatasetPair
from instantiation_net.training.losses import distance_error, l1_loss
from instantiation_net.training.optim import SGDState, sgd_step

logger = logging.getLogger(__name__)

MIN_FRAMES = 3
WORST_FOLDS = 2


@dataclass
class FoldTraining:
    params: ModelParams
    history: list[float]


@dataclass
class FoldOutcome:
    result: FoldResult
    params: ModelParams | None = None
    prediction: Mesh | None = None


def fold_rngs(seed: int, fold_index: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (init, shuffle) generators for one fold."""
    return np.random.default_rng([seed, fold_index, 0]), np.random.default_rng([seed, fold_index, 1])


def training_checksum(pairs: list[DatasetPair]) -> str:
    digest = hashlib.sha256()
    for pair in pairs:
        digest.update(pair.checksum().encode('ascii'))
    return digest.hexdigest()


def mean_shape_baseline(meshes: list) -> np.ndarray:
    """Coordinate-wise mean of corresponding vertices."""
    if not meshes:
        raise DimensionError('mean shape of an empty set of meshes')
    stack = np.stack([m.vertices if isinstance(m, Mesh) else np.asarray(m, dtype=np.float64) for m in meshes])
    return stack.mean(axis=0)


def train_fold(pairs: list[DatasetPair], model_config: ModelConfig, train_config: TrainConfig,
               hierarchy: SamplingHierarchy, fold_index: int = 0, n_frames: int | None = None) -> FoldTraining:
    """Train fresh parameters on `pairs` for `max_epochs` epochs of batch-size-1 SGD."""
    if not pairs:
        raise DimensionError('cannot train on an empty training list')
    n_frames = len(pairs) if n_frames is None else n_frames
    init_rng, shuffle_rng = fold_rngs(train_config.seed, fold_index)
    params = init_params(model_config, hierarchy, hierarchy.levels[0], init_rng)
    state = SGDState()
    trainable = params.trainable()
    history = []
    for epoch in range(train_config.max_epochs):
        total = 0.0
        try:
            for i in shuffle_rng.permutation(len(pairs)):
                pair = pairs[i]
                params.zero_grad()
                loss = l1_loss(forward(pair.image, params, training=True), pair.mesh.vertices)
                backward(loss)
                sgd_step(trainable, state, train_config, n_frames)
                total += loss.item()
        except NumericalError as e:
            raise DivergenceError(f'fold {fold_index} diverged at epoch {epoch}: {e.detail}') from e
        history.append(total / len(pairs))
        if (epoch + 1) % train_config.log_every == 0 or epoch + 1 == train_config.max_epochs:
            logger.info('epoch done fold=%d epoch=%d mean_l1=%.6g', fold_index, epoch + 1, history[-1])
    if not all(np.isfinite(t.data).all() for t in params.tensors.values()):
        raise DivergenceError(f'fold {fold_index} ended with non-finite parameters')
    return FoldTraining(params=params, history=history)


def run_fold(dataset: list[DatasetPair], fold_index: int, model_config: ModelConfig, train_config: TrainConfig,
             hierarchy: SamplingHierarchy, reproducible: bool = False) -> FoldOutcome:
    """Hold out frame `fold_index`, train on the rest, evaluate the held-out frame."""
    held_out = dataset[fold_index]
    training = [p for p in dataset if p.frame_index != held_out.frame_index]
    held_out_content = held_out.content_checksum()
    leaked = [p.frame_index for p in training if p.content_checksum() == held_out_content]
    if leaked:
        raise LeakageError(
            f'held-out frame {held_out.frame_index} of fold {fold_index} also appears in training as frame(s) {leaked}'
        )
    checksum = training_checksum(training)
    baseline = distance_error(mean_shape_baseline([p.mesh for p in training]), held_out.mesh.vertices)

    logger.info('fold start fold=%d frame=%d train_frames=%d', fold_index, held_out.frame_index, len(training))
    started = time.perf_counter()
    try:
        fit = train_fold(training, model_config, train_config, hierarchy, fold_index, n_frames=len(dataset))
    except DivergenceError as e:
        logger.warning('fold diverged fold=%d reason=%s', fold_index, e.detail)
        return FoldOutcome(result=FoldResult(
            fold_index=fold_index, frame_index=held_out.frame_index, frames_trained=len(training),
            final_l1=float('nan'), distance_error_mm=float('nan'), baseline_error_mm=baseline,
            train_checksum=checksum, status=FoldStatus.DIVERGED, message=e.detail,
        ))
    elapsed = 0.0 if reproducible else time.perf_counter() - started

    if training_checksum(training) != checksum:
        raise LeakageError(f'training list of fold {fold_index} changed during training')
    prediction = predict_mesh(held_out.image, fit.params)
    error = distance_error(prediction.vertices, held_out.mesh.vertices)
    logger.info('fold done fold=%d error_mm=%.6g baseline_mm=%.6g', fold_index, error, baseline)
    return FoldOutcome(
        result=FoldResult(
            fold_index=fold_index, frame_index=held_out.frame_index, frames_trained=len(training),
            final_l1=fit.history[-1], distance_error_mm=error, baseline_error_mm=baseline,
            wall_seconds=elapsed, train_checksum=checksum,
        ),
        params=fit.params,
        prediction=prediction,
    )


def _fold_job(args) -> FoldOutcome:
    return run_fold(*args)


def summarize(results: list[FoldResult]) -> LeaveOneOutSummary:
    done = [r for r in results if r.status is FoldStatus.OK]
    if not done:
        return LeaveOneOutSummary(folds=len(results), completed=0, mean_error_mm=float('nan'),
                                  mean_baseline_error_mm=float('nan'), improvement=float('nan'),
                                  fraction_better=0.0)
    mean_error = float(np.mean([r.distance_error_mm for r in done]))
    mean_baseline = float(np.mean([r.baseline_error_mm for r in done]))
    ranked = sorted(done, key=lambda r: (-r.distance_error_mm, r.fold_index))
    return LeaveOneOutSummary(
        folds=len(results),
        completed=len(done),
        mean_error_mm=mean_error,
        mean_baseline_error_mm=mean_baseline,
        improvement=(mean_baseline - mean_error) / mean_baseline if mean_baseline > 0 else 0.0,
        fraction_better=sum(r.distance_error_mm < r.baseline_error_mm for r in done) / len(done),
        worst_frames=[r.frame_index for r in ranked[:WORST_FOLDS]],
    )


def leave_one_out(dataset: list[DatasetPair], model_config: ModelConfig, train_config: TrainConfig,
                  hierarchy: SamplingHierarchy, reproducible: bool = False,
                  folds: list[int] | None = None) -> tuple[LeaveOneOutReport, list[FoldOutcome]]:
    """One fold per frame, serially or across `train_config.workers` processes."""
    if len(dataset) < MIN_FRAMES:
        raise DimensionError(f'leave-one-out needs at least {MIN_FRAMES} frames, got {len(dataset)}')
    folds = list(range(len(dataset))) if folds is None else folds
    jobs = [(dataset, f, model_config, train_config, hierarchy, reproducible) for f in folds]
    if train_config.workers > 1:
        with ProcessPoolExecutor(max_workers=train_config.workers) as pool:
            outcomes = list(pool.map(_fold_job, jobs))
    else:
        outcomes = [_fold_job(job) for job in jobs]
    results = [o.result for o in outcomes]
    return LeaveOneOutReport(folds=results, summary=summarize(results)), outcomes
