import argparse
import logging
from pathlib import Path

from instantiation_net.commands.common import add_common_flags, fold_stem, parse_index_list, skip_existing, write_csv
from instantiation_net.exceptions import ConfigurationError
from instantiation_net.fileio.atomic import atomic_write_text
from instantiation_net.fileio.config_file import load_experiment_config
from instantiation_net.fileio.mesh_io import write_mesh
from instantiation_net.model.network import predict_mesh
from instantiation_net.model.params import load_model, save_model
from instantiation_net.sampling.hierarchy import load_or_build_hierarchy
from instantiation_net.schemes.config import ExperimentConfig
from instantiation_net.training.dataset import DatasetPair, load_dataset
from instantiation_net.training.losses import distance_error, per_vertex_error
from instantiation_net.training.trainer import leave_one_out, mean_shape_baseline

logger = logging.getLogger(__name__)

FOLD_COLUMNS = ('fold_index', 'frames_trained', 'final_l1', 'distance_error_mm', 'wall_seconds')
EVAL_COLUMNS = ('fold_index', 'frame_index', 'distance_error_mm', 'baseline_error_mm')


def _experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', type=Path, help='flat key = value experiment file')
    parser.add_argument('--dataset', type=Path, help='dataset directory (overrides dataset_dir)')
    parser.add_argument('--output', type=Path, help='output directory (overrides output_dir)')
    parser.add_argument('--reproducible', action='store_true', help='single thread, wall_seconds written as 0')


def register(subparsers) -> None:
    train = subparsers.add_parser('train', help='leave-one-out training over a dataset')
    _experiment_flags(train)
    train.add_argument('--seed', type=int, required=True)
    train.add_argument('--max-epochs', type=int)
    train.add_argument('--workers', type=int)
    train.add_argument('--folds', help='comma-separated fold indices (default: all)')
    add_common_flags(train)
    train.set_defaults(handler=run_train)

    evaluate = subparsers.add_parser('eval', help='evaluate saved fold checkpoints on their held-out frames')
    _experiment_flags(evaluate)
    add_common_flags(evaluate)
    evaluate.set_defaults(handler=run_eval)


def experiment_from_args(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {
        'dataset_dir': args.dataset,
        'output_dir': args.output,
        'reproducible': True if args.reproducible else None,
        'seed': getattr(args, 'seed', None),
        'max_epochs': getattr(args, 'max_epochs', None),
        'workers': getattr(args, 'workers', None),
    }
    return load_experiment_config(args.config, overrides)


def _prepare(config: ExperimentConfig):
    pairs, _ = load_dataset(config.dataset_dir)
    encoder = config.encoder
    height, width = pairs[0].image.shape[:2]
    if (height, width) != (encoder.input_height, encoder.input_width):
        raise ConfigurationError(
            f'dataset images are {height}x{width}, encoder expects {encoder.input_height}x{encoder.input_width}'
        )
    hierarchy = load_or_build_hierarchy(pairs[0].mesh, config.train.stride, config.hierarchy.levels,
                                        cache_dir=config.output_dir)
    return pairs, hierarchy


def run_train(args: argparse.Namespace) -> int:
    config = experiment_from_args(args)
    out = config.output_dir
    if skip_existing(out / 'folds.csv', args.force):
        return 0
    pairs, hierarchy = _prepare(config)
    report, outcomes = leave_one_out(pairs, config.build_model_config(), config.train, hierarchy,
                                     reproducible=config.reproducible, folds=parse_index_list(args.folds))
    for outcome in outcomes:
        stem = fold_stem(outcome.result.fold_index)
        if outcome.params is not None:
            save_model(out / f'{stem}.ckpt', outcome.params)
            write_mesh(out / f'{stem}_pred.obj', outcome.prediction)
    write_csv(out / 'folds.csv', FOLD_COLUMNS, (
        (r.fold_index, r.frames_trained, r.final_l1, r.distance_error_mm, r.wall_seconds) for r in report.folds
    ))
    atomic_write_text(out / 'summary.json', report.model_dump_json(indent=2))
    summary = report.summary
    logger.info('training done folds=%d completed=%d mean_error_mm=%.6g baseline_mm=%.6g',
                summary.folds, summary.completed, summary.mean_error_mm, summary.mean_baseline_error_mm)
    return 0


def evaluate_fold(pairs: list[DatasetPair], fold_index: int, checkpoint: Path, hierarchy):
    held_out = pairs[fold_index]
    params = load_model(checkpoint, hierarchy)
    prediction = predict_mesh(held_out.image, params)
    training = [p.mesh for p in pairs if p.frame_index != held_out.frame_index]
    baseline = distance_error(mean_shape_baseline(training), held_out.mesh.vertices)
    errors = per_vertex_error(prediction.vertices, held_out.mesh.vertices)
    return held_out.frame_index, float(errors.mean()), baseline, errors


def run_eval(args: argparse.Namespace) -> int:
    config = experiment_from_args(args)
    out = config.output_dir
    if skip_existing(out / 'eval.csv', args.force):
        return 0
    pairs, hierarchy = _prepare(config)
    rows = []
    for fold_index in range(len(pairs)):
        checkpoint = out / f'{fold_stem(fold_index)}.ckpt'
        if not checkpoint.exists():
            logger.warning('checkpoint missing, fold skipped fold=%d path=%s', fold_index, checkpoint)
            continue
        frame, error, baseline, errors = evaluate_fold(pairs, fold_index, checkpoint, hierarchy)
        write_csv(out / f'{fold_stem(fold_index)}_vertex_error.csv', ('vertex_index', 'error_mm'),
                  ((i, float(e)) for i, e in enumerate(errors)))
        rows.append((fold_index, frame, error, baseline))
        logger.info('fold evaluated fold=%d error_mm=%.6g baseline_mm=%.6g', fold_index, error, baseline)
    write_csv(out / 'eval.csv', EVAL_COLUMNS, rows)
    return 0
