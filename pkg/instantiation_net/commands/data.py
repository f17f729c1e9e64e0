import argparse
import logging
from pathlib import Path

from pydantic import ValidationError

from instantiation_net.commands.common import add_common_flags, skip_existing
from instantiation_net.exceptions import InvalidConfigError
from instantiation_net.presets import CYCLE_PRESETS
from instantiation_net.schemes.shape import RenderSpec, ShapeCycleSpec
from instantiation_net.training.dataset import MANIFEST_NAME, make_dataset, write_dataset

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser('generate-data', help='write a synthetic deforming-shape dataset')
    parser.add_argument('--output', type=Path, required=True, help='dataset directory')
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--preset', default='ico162', choices=sorted(CYCLE_PRESETS))
    parser.add_argument('--frames', type=int)
    parser.add_argument('--subdivisions', type=int)
    parser.add_argument('--noise-mm', type=float)
    parser.add_argument('--height', type=int, help='image height in pixels')
    parser.add_argument('--width', type=int, help='image width in pixels')
    parser.add_argument('--projection', choices=['orthographic', 'perspective'])
    add_common_flags(parser)
    parser.set_defaults(handler=generate_data)


def cycle_spec_from_args(args: argparse.Namespace) -> ShapeCycleSpec:
    fields = dict(CYCLE_PRESETS[args.preset])
    overrides = {'frames': args.frames, 'subdivisions': args.subdivisions, 'noise_mm': args.noise_mm}
    fields.update({k: v for k, v in overrides.items() if v is not None})
    render = {'height': args.height, 'width': args.width, 'projection': args.projection}
    render = {k: v for k, v in render.items() if v is not None}
    try:
        return ShapeCycleSpec(**fields, render=RenderSpec(**render))
    except ValidationError as e:
        raise InvalidConfigError(f'invalid dataset parameters:\n{e}') from e


def generate_data(args: argparse.Namespace) -> int:
    spec = cycle_spec_from_args(args)
    if skip_existing(args.output / MANIFEST_NAME, args.force):
        return 0
    pairs = make_dataset(spec, args.seed)
    write_dataset(args.output, spec, args.seed, pairs)
    return 0
