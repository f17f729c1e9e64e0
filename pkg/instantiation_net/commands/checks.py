import argparse
import logging
import sys

from pydantic import TypeAdapter

from instantiation_net.commands.common import add_common_flags
from instantiation_net.schemes.report import CheckResult
from instantiation_net.verification import (
    BOUNDARY_REQUIRED,
    BOUNDARY_SEEDS,
    DESK_FRAMES,
    LOO_EPOCHS,
    check_leave_one_out,
    run_boundary_experiment,
    run_gradient_suite,
    run_oracle_suite,
)

logger = logging.getLogger(__name__)

_results_json = TypeAdapter(list[CheckResult])


def _training_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--frames', type=int, default=DESK_FRAMES, help='frames in the synthetic cycle')
    parser.add_argument('--max-epochs', type=int, default=LOO_EPOCHS)
    parser.add_argument('--workers', type=int, default=1, help='fold processes per leave-one-out run')


def register(subparsers) -> None:
    gradcheck = subparsers.add_parser('gradcheck', help='finite-difference check of every differentiable op')
    gradcheck.add_argument('--seed', type=int, default=0)
    gradcheck.add_argument('--instances', type=int, default=10)
    gradcheck.add_argument('--skip-end-to-end', action='store_true')
    add_common_flags(gradcheck, outputs=False)
    gradcheck.set_defaults(handler=run_gradcheck)

    oracle = subparsers.add_parser('oracle-check', help='spectral, Laplacian, hierarchy and schedule oracles')
    oracle.add_argument('--seed', type=int, default=0)
    add_common_flags(oracle, outputs=False)
    oracle.set_defaults(handler=run_oracle_check)

    loo = subparsers.add_parser('loo-check', help='leave-one-out against the mean-shape baseline, run twice')
    loo.add_argument('--seed', type=int, default=0)
    _training_flags(loo)
    loo.add_argument('--no-repeat', action='store_true', help='skip the determinism repeat')
    add_common_flags(loo, outputs=False)
    loo.set_defaults(handler=run_loo_check)

    boundary = subparsers.add_parser('boundary-check', help='rank fold errors over seeded leave-one-out runs')
    boundary.add_argument('--seeds', type=int, default=BOUNDARY_SEEDS)
    boundary.add_argument('--required', type=int, default=BOUNDARY_REQUIRED,
                          help='seeds in which the scale extremes must hold the two worst folds')
    _training_flags(boundary)
    add_common_flags(boundary, outputs=False)
    boundary.set_defaults(handler=run_boundary_check)


def report(results: list[CheckResult]) -> int:
    sys.stdout.write(_results_json.dump_json(results, indent=2).decode('utf-8') + '\n')
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.error('checks failed names=%s', ','.join(failed))
        return 1
    return 0


def run_gradcheck(args: argparse.Namespace) -> int:
    return report(run_gradient_suite(args.seed, args.instances, end_to_end=not args.skip_end_to_end))


def run_oracle_check(args: argparse.Namespace) -> int:
    return report(run_oracle_suite(args.seed))


def run_loo_check(args: argparse.Namespace) -> int:
    return report(check_leave_one_out(args.seed, args.frames, args.max_epochs, args.workers,
                                      repeat=not args.no_repeat))


def run_boundary_check(args: argparse.Namespace) -> int:
    result = run_boundary_experiment(args.seeds, args.frames, args.max_epochs, args.workers, args.required)
    sys.stdout.write(result.model_dump_json(indent=2) + '\n')
    for run in result.runs:
        logger.info('ranking seed=%d worst_frames=%s', run.seed, run.worst_frames)
    if not result.check.passed:
        logger.error('checks failed names=%s detail=%s', result.check.name, result.check.detail)
        return 1
    return 0
