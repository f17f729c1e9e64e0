"""Gradient, oracle and training check suites behind the `*-check` commands."""
import logging
from typing import Callable

import numpy as np

from instantiation_net.autodiff import ops
from instantiation_net.autodiff.conv import NormMode, Padding, PoolMode, batch_norm, conv2d, pool2d
from instantiation_net.autodiff.gradcheck import check_gradients
from instantiation_net.autodiff.tensor import Tensor
from instantiation_net.graph.mesh import Mesh
from instantiation_net.graph.spectral import (
    ChebConvLayer,
    build_laplacian,
    cheb_conv,
    eigendecompose,
    laplacian_matrix,
    spectral_filter_exact,
)
from instantiation_net.model.network import forward
from instantiation_net.model.params import init_params
from instantiation_net.presets import ENCODER_PRESETS
from instantiation_net.sampling.hierarchy import (
    SamplingHierarchy,
    build_hierarchy,
    level_counts,
    upsample,
    upsampling_matrix,
)
from instantiation_net.sampling.qem import SimplifyStrategy, qem_simplify
from instantiation_net.schemes.config import EncoderConfig, ModelConfig, TrainConfig
from instantiation_net.schemes.report import BoundaryReport, BoundaryRun, CheckResult
from instantiation_net.schemes.shape import ShapeCycleSpec
from instantiation_net.synthetic.cycle import extreme_frames
from instantiation_net.synthetic.shapes import icosphere, random_hull_mesh
from instantiation_net.training.dataset import DatasetPair, make_dataset
from instantiation_net.training.losses import l1_loss
from instantiation_net.training.optim import learning_rate
from instantiation_net.training.trainer import leave_one_out, train_fold

logger = logging.getLogger(__name__)

GRADIENT_TOLERANCE = 1e-4
SPECTRAL_TOLERANCE = 1e-8
ROW_SUM_TOLERANCE = 1e-12
PLANTED_TOLERANCE = 1e-10
SCHEDULE_TOLERANCE = 1e-12
DETERMINISM_TOLERANCE = 1e-12
TIE_MARGIN = 1e-3

DESK_FRAMES = 20
OVERFIT_EPOCHS = 500
OVERFIT_RATIO = 0.01
LOO_EPOCHS = 300
LOO_FRACTION_BETTER = 0.8
LOO_IMPROVEMENT = 0.2
BOUNDARY_SEEDS = 10
BOUNDARY_REQUIRED = 7

# (fn, tensors, skip) for one random instance of an operation
Instance = tuple[Callable[[], Tensor], dict[str, Tensor], Callable | None]


def _param(rng: np.random.Generator, shape, name: str) -> Tensor:
    return Tensor(rng.standard_normal(shape), requires_grad=True, name=name)


def _weighted(build: Callable[[], Tensor], rng: np.random.Generator) -> Callable[[], Tensor]:
    """Random fixed projection of an op's output onto a scalar."""
    weights = rng.standard_normal(build().shape)
    return lambda: ops.weighted_sum(build(), weights)


def _conv_instance(rng) -> Instance:
    cin, cout = rng.integers(1, 4), rng.integers(1, 4)
    k = int(rng.choice([1, 2, 3]))
    stride = int(rng.integers(1, 3))
    padding = Padding(rng.choice(['same', 'valid']))
    x = _param(rng, (int(rng.integers(1, 3)), int(rng.integers(k + 2, 8)), int(rng.integers(k + 2, 8)), cin), 'x')
    kernel = _param(rng, (cin, k, k, cout), 'kernel')
    return _weighted(lambda: conv2d(x, kernel, stride, padding), rng), {'x': x, 'kernel': kernel}, None


def _avg_pool_instance(rng) -> Instance:
    k = int(rng.choice([2, 3]))
    padding = Padding(rng.choice(['same', 'valid']))
    x = _param(rng, (1, int(rng.integers(k, 9)), int(rng.integers(k, 9)), int(rng.integers(1, 4))), 'x')
    return _weighted(lambda: pool2d(x, k, PoolMode.AVERAGE, padding=padding), rng), {'x': x}, None


def _batch_norm_instance(rng) -> Instance:
    c = int(rng.integers(1, 5))
    x = _param(rng, (int(rng.integers(1, 3)), 3, 3, c), 'x')
    gamma = _param(rng, (c,), 'gamma')
    beta = _param(rng, (c,), 'beta')
    build = lambda: batch_norm(x, gamma, beta, None, NormMode.TRAIN)  # noqa: E731
    return _weighted(build, rng), {'x': x, 'gamma': gamma, 'beta': beta}, None


def _relu_instance(rng) -> Instance:
    x = _param(rng, (4, 5), 'x')
    skip = lambda name, index: abs(x.data[index]) < TIE_MARGIN  # noqa: E731
    return _weighted(lambda: ops.relu(x), rng), {'x': x}, skip


def _fully_connected_instance(rng) -> Instance:
    n, d, out = int(rng.integers(1, 3)), int(rng.integers(2, 6)), int(rng.integers(1, 5))
    x = _param(rng, (n, d, 2), 'x')
    weight = _param(rng, (2 * d, out), 'weight')
    bias = _param(rng, (out,), 'bias')
    build = lambda: ops.fully_connected(x, weight, bias)  # noqa: E731
    return _weighted(build, rng), {'x': x, 'weight': weight, 'bias': bias}, None


def _cheb_conv_instance(rng) -> Instance:
    mesh = random_hull_mesh(int(rng.integers(6, 21)), rng)
    bundle = build_laplacian(mesh)
    order = int(rng.choice([1, 2, 3, 5]))
    layer = ChebConvLayer.create(2, 3, order, rng)
    layer.bias.data[...] = rng.standard_normal(3)
    v = _param(rng, (mesh.vertex_count, 2), 'v')
    tensors = {'v': v, 'theta': layer.theta, 'bias': layer.bias}
    return _weighted(lambda: cheb_conv(layer, bundle, v), rng), tensors, None


def _upsample_instance(rng) -> Instance:
    fine = icosphere(1)
    coarse = qem_simplify(fine, int(rng.integers(12, 31)))
    q = upsampling_matrix(fine.vertices, coarse.mesh, coarse.kept)
    features = _param(rng, (coarse.mesh.vertex_count, 3), 'features')
    return _weighted(lambda: upsample(q, features), rng), {'features': features}, None


def _l1_instance(rng) -> Instance:
    pred = _param(rng, (5, 3), 'pred')
    truth = rng.standard_normal((5, 3))
    skip = lambda name, index: abs(pred.data[index] - truth[index]) < TIE_MARGIN  # noqa: E731
    return (lambda: l1_loss(pred, truth)), {'pred': pred}, skip


OPERATION_CHECKS: dict[str, Callable[[np.random.Generator], Instance]] = {
    'conv2d': _conv_instance,
    'pool2d_average': _avg_pool_instance,
    'batch_norm': _batch_norm_instance,
    'relu': _relu_instance,
    'fully_connected': _fully_connected_instance,
    'cheb_conv': _cheb_conv_instance,
    'upsample': _upsample_instance,
    'l1_loss': _l1_instance,
}


def check_operation(name: str, rng: np.random.Generator, instances: int = 10, points: int = 5,
                    tolerance: float = GRADIENT_TOLERANCE) -> CheckResult:
    worst, worst_where, checked = 0.0, '', 0
    for i in range(instances):
        fn, tensors, skip = OPERATION_CHECKS[name](rng)
        report = check_gradients(fn, tensors, points, rng, skip=skip)
        checked += report.checked
        if report.max_rel_error >= worst:
            worst, worst_where = report.max_rel_error, f'instance {i} {report.worst}'
    return CheckResult(name=name, passed=checked > 0 and worst < tolerance, max_error=worst,
                       tolerance=tolerance, detail=f'checked={checked} worst={worst_where}')


def desk_model_config() -> ModelConfig:
    return ModelConfig(encoder=EncoderConfig(**ENCODER_PRESETS['desk']), feature_channels=16,
                       cheb_order=3, stride=3, levels=4)


def check_end_to_end(rng: np.random.Generator, samples: int = 10,
                     tolerance: float = GRADIENT_TOLERANCE) -> CheckResult:
    """Whole network at desk scale, one coordinate in each of `samples` random parameter tensors."""
    config = desk_model_config()
    template = icosphere(2, 30.0)
    hierarchy = build_hierarchy(template, config.stride, config.levels)
    params = init_params(config, hierarchy, template, rng)
    for name, t in params.tensors.items():
        if name.endswith('.bias') or name.endswith('.beta'):
            t.data[...] = 0.1 * rng.standard_normal(t.shape)
    image = rng.uniform(size=(config.encoder.input_height, config.encoder.input_width, 1))
    weights = rng.standard_normal((template.vertex_count, 3))
    names = rng.choice(sorted(params.tensors), size=min(samples, len(params.tensors)), replace=False)
    chosen = {str(n): params.tensors[str(n)] for n in names}
    report = check_gradients(lambda: ops.weighted_sum(forward(image, params, training=True), weights),
                             chosen, 1, rng)
    return CheckResult(name='end_to_end', passed=report.passed(tolerance), max_error=report.max_rel_error,
                       tolerance=tolerance, detail=f'checked={report.checked} worst={report.worst}')


def run_gradient_suite(seed: int = 0, instances: int = 10, end_to_end: bool = True) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = [check_operation(name, rng, instances) for name in OPERATION_CHECKS]
    if end_to_end:
        results.append(check_end_to_end(rng))
    for r in results:
        logger.info('gradient check name=%s passed=%s max_rel_error=%.3g', r.name, r.passed, r.max_error)
    return results


def check_triangle_laplacian() -> CheckResult:
    mesh = Mesh.create(np.eye(3), [[0, 1, 2]])
    expected = np.array([[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]])
    error = float(np.abs(laplacian_matrix(mesh).toarray() - expected).max())
    return CheckResult(name='triangle_laplacian', passed=error == 0.0, max_error=error, tolerance=0.0)


def check_random_laplacians(rng: np.random.Generator, meshes: int = 50) -> list[CheckResult]:
    row_sum, scaled_one = 0.0, 0.0
    for _ in range(meshes):
        mesh = random_hull_mesh(int(rng.integers(6, 51)), rng)
        bundle = build_laplacian(mesh)
        row_sum = max(row_sum, float(np.abs(np.asarray(bundle.laplacian.sum(axis=1))).max()))
        ones = np.ones(mesh.vertex_count)
        scaled_one = max(scaled_one, float(np.abs(bundle.scaled @ ones + 1.0).max()))
    return [
        CheckResult(name='laplacian_row_sums', passed=row_sum == 0.0, max_error=row_sum, tolerance=0.0),
        CheckResult(name='scaled_laplacian_constant', passed=scaled_one < 1e-9, max_error=scaled_one,
                    tolerance=1e-9),
    ]


def check_spectral_oracle(rng: np.random.Generator, meshes: int = 20) -> CheckResult:
    """cheb_conv against dense eigendecomposition filtering on random small meshes."""
    worst = 0.0
    for _ in range(meshes):
        mesh = random_hull_mesh(int(rng.integers(6, 51)), rng)
        bundle = build_laplacian(mesh)
        u, lam = eigendecompose(bundle.laplacian)
        order = int(rng.choice([1, 2, 3, 5]))
        layer = ChebConvLayer.create(2, 2, order, rng)
        layer.bias.data[...] = rng.standard_normal(2)
        v = rng.standard_normal((mesh.vertex_count, 2))
        fast = cheb_conv(layer, bundle, Tensor(v)).numpy()
        exact = np.tile(layer.bias.data, (mesh.vertex_count, 1))
        for i in range(2):
            for j in range(2):
                exact[:, j] += spectral_filter_exact(bundle, u, lam, v[:, i], layer.theta.data[i, j])
        worst = max(worst, float(np.abs(fast - exact).max()))
    return CheckResult(name='spectral_oracle', passed=worst < SPECTRAL_TOLERANCE, max_error=worst,
                       tolerance=SPECTRAL_TOLERANCE)


def check_hierarchy(subdivisions: int, stride: int) -> CheckResult:
    template = icosphere(subdivisions, 30.0)
    hierarchy = build_hierarchy(template, stride)
    expected = level_counts(template.vertex_count, stride)
    problems = []
    if hierarchy.level_counts != expected:
        problems.append(f'counts {hierarchy.level_counts} != {expected}')
    worst = 0.0
    for level, (d, q) in enumerate(zip(hierarchy.down_maps, hierarchy.up_maps)):
        fine = hierarchy.levels[level].vertices
        coarse = hierarchy.levels[level + 1].vertices
        if not np.array_equal(d @ fine, coarse):
            problems.append(f'level {level}: down-sampling is not an exact selection')
        if q.data.min() < 0:
            problems.append(f'level {level}: negative up-sampling weight')
        worst = max(worst, float(np.abs(np.asarray(q.sum(axis=1)).ravel() - 1.0).max()))
        kept = d.indices
        if not np.array_equal((q @ (d @ fine))[kept], fine[kept]):
            problems.append(f'level {level}: retained vertices do not round-trip')
    passed = not problems and worst <= ROW_SUM_TOLERANCE
    return CheckResult(name=f'hierarchy_ico{template.vertex_count}_s{stride}', passed=passed, max_error=worst,
                       tolerance=ROW_SUM_TOLERANCE, detail='; '.join(problems))


def check_planted_vertex(rng: np.random.Generator) -> CheckResult:
    """A discarded vertex lying on a coarse triangle is rebuilt from that triangle's corners."""
    coarse_vertices = np.array([[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [0.0, 10.0, 0.0], [0.0, 0.0, 10.0]])
    coarse = Mesh.create(coarse_vertices, [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]])
    weights = rng.dirichlet(np.ones(3))
    planted = weights @ coarse_vertices[[1, 2, 3]]
    fine_vertices = np.vstack([coarse_vertices, planted])
    q = upsampling_matrix(fine_vertices, coarse, np.arange(4))
    error = float(np.abs(q @ coarse_vertices - fine_vertices).max())
    return CheckResult(name='planted_vertex', passed=error < PLANTED_TOLERANCE, max_error=error,
                       tolerance=PLANTED_TOLERANCE)


def check_qem_strategies(rng: np.random.Generator) -> CheckResult:
    mesh = random_hull_mesh(40, rng)
    heap = qem_simplify(mesh, 12, SimplifyStrategy.HEAP)
    rescan = qem_simplify(mesh, 12, SimplifyStrategy.RESCAN)
    same = np.array_equal(heap.kept, rescan.kept) and heap.costs == rescan.costs
    gap = max((abs(a - b) for a, b in zip(heap.costs, rescan.costs)), default=0.0)
    return CheckResult(name='qem_heap_matches_rescan', passed=same, max_error=gap, tolerance=0.0)


def check_schedule(n_frames: int = 20) -> CheckResult:
    config = TrainConfig()
    expected = {0: 5e-3, 5 * n_frames: 4.85e-3, 10 * n_frames: 4.7045e-3}
    worst = max(abs(learning_rate(config, i, n_frames) - lr) for i, lr in expected.items())
    return CheckResult(name='lr_schedule', passed=worst <= SCHEDULE_TOLERANCE, max_error=worst,
                       tolerance=SCHEDULE_TOLERANCE)


def run_oracle_suite(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = [check_triangle_laplacian()]
    results.extend(check_random_laplacians(rng))
    results.append(check_spectral_oracle(rng))
    results.append(check_hierarchy(2, 3))
    results.append(check_hierarchy(3, 4))
    results.append(check_planted_vertex(rng))
    results.append(check_qem_strategies(rng))
    results.append(check_schedule())
    for r in results:
        logger.info('oracle check name=%s passed=%s max_error=%.3g', r.name, r.passed, r.max_error)
    return results


def desk_train_config(seed: int = 0, max_epochs: int = OVERFIT_EPOCHS, workers: int = 1) -> TrainConfig:
    return TrainConfig(seed=seed, max_epochs=max_epochs, feature_channels=16, stride=3, workers=workers,
                       log_every=50)


def desk_subject(frames: int = DESK_FRAMES, seed: int = 0) -> tuple[list[DatasetPair], SamplingHierarchy]:
    """A synthetic cycle with the hierarchy built on its first frame, as the CLI does."""
    pairs = make_dataset(ShapeCycleSpec(frames=frames), seed)
    config = desk_model_config()
    return pairs, build_hierarchy(pairs[0].mesh, config.stride, config.levels)


def check_overfit(seed: int = 0, frames: int = DESK_FRAMES, max_epochs: int = OVERFIT_EPOCHS) -> CheckResult:
    """Fit frame 0 alone. The decay period still counts every frame of the subject."""
    pairs, hierarchy = desk_subject(frames, seed)
    fit = train_fold(pairs[:1], desk_model_config(), desk_train_config(seed, max_epochs), hierarchy,
                     n_frames=frames)
    ratio = fit.history[-1] / fit.history[0]
    return CheckResult(name='overfit_single_pair', passed=ratio < OVERFIT_RATIO, max_error=ratio,
                       tolerance=OVERFIT_RATIO,
                       detail=f'epoch0_l1={fit.history[0]:.6g} final_l1={fit.history[-1]:.6g}')


def check_leave_one_out(seed: int = 0, frames: int = DESK_FRAMES, max_epochs: int = LOO_EPOCHS,
                        workers: int = 1, repeat: bool = True) -> list[CheckResult]:
    """Trained folds against the mean-shape baseline, and optionally a bitwise repeat of the whole run."""
    pairs, hierarchy = desk_subject(frames, seed)
    train_config = desk_train_config(seed, max_epochs, workers)
    report, _ = leave_one_out(pairs, desk_model_config(), train_config, hierarchy, reproducible=True)
    summary = report.summary
    complete = summary.completed == summary.folds
    results = [
        CheckResult(name='loo_fraction_better', passed=complete and summary.fraction_better >= LOO_FRACTION_BETTER,
                    max_error=summary.fraction_better, tolerance=LOO_FRACTION_BETTER,
                    detail=f'completed={summary.completed}/{summary.folds}'),
        CheckResult(name='loo_improvement', passed=complete and summary.improvement >= LOO_IMPROVEMENT,
                    max_error=summary.improvement, tolerance=LOO_IMPROVEMENT,
                    detail=f'mean_error_mm={summary.mean_error_mm:.6g} '
                           f'mean_baseline_mm={summary.mean_baseline_error_mm:.6g}'),
    ]
    if repeat:
        again, _ = leave_one_out(pairs, desk_model_config(), train_config, hierarchy, reproducible=True)
        first = np.array([r.distance_error_mm for r in report.folds])
        second = np.array([r.distance_error_mm for r in again.folds])
        same_status = [r.status for r in report.folds] == [r.status for r in again.folds]
        gap = float(np.max(np.abs(first - second), initial=0.0, where=~np.isnan(first - second)))
        results.append(CheckResult(name='loo_determinism', passed=same_status and gap <= DETERMINISM_TOLERANCE,
                                   max_error=gap, tolerance=DETERMINISM_TOLERANCE))
    for r in results:
        logger.info('leave-one-out check name=%s passed=%s value=%.6g', r.name, r.passed, r.max_error)
    return results


def run_boundary_experiment(seeds: int = BOUNDARY_SEEDS, frames: int = DESK_FRAMES, max_epochs: int = LOO_EPOCHS,
                            workers: int = 1, required: int = BOUNDARY_REQUIRED) -> BoundaryReport:
    """Repeat leave-one-out per seed and count how often the scale extremes hold the two worst folds."""
    extremes = sorted(extreme_frames(frames))
    runs = []
    for seed in range(seeds):
        pairs, hierarchy = desk_subject(frames, seed)
        report, _ = leave_one_out(pairs, desk_model_config(), desk_train_config(seed, max_epochs, workers),
                                  hierarchy, reproducible=True)
        worst = report.summary.worst_frames
        runs.append(BoundaryRun(seed=seed, worst_frames=worst, extremes_on_top=sorted(worst) == extremes))
        logger.info('boundary run seed=%d worst_frames=%s extremes=%s', seed, worst, extremes)
    hits = sum(r.extremes_on_top for r in runs)
    check = CheckResult(name='boundary_effect', passed=hits >= required, max_error=float(seeds - hits),
                        tolerance=float(seeds - required), detail=f'extremes on top in {hits} of {seeds} seeds')
    return BoundaryReport(extreme_frames=extremes, runs=runs, check=check)
