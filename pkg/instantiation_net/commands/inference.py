import argparse
import logging
import time
from pathlib import Path

from instantiation_net.commands.common import add_common_flags, skip_existing
from instantiation_net.fileio.mesh_io import write_mesh
from instantiation_net.fileio.pgm import read_pgm
from instantiation_net.model.network import predict_mesh
from instantiation_net.model.params import load_model
from instantiation_net.sampling.hierarchy import load_hierarchy

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser('infer', help='predict a mesh from one image')
    parser.add_argument('--checkpoint', type=Path, required=True)
    parser.add_argument('--hierarchy', type=Path, required=True, help='hierarchy sidecar (.npz) written by train')
    parser.add_argument('--image', type=Path, required=True, help='8- or 16-bit PGM')
    parser.add_argument('--output', type=Path, required=True, help='.off or .obj mesh')
    add_common_flags(parser)
    parser.set_defaults(handler=run_infer)


def run_infer(args: argparse.Namespace) -> int:
    if skip_existing(args.output, args.force):
        return 0
    hierarchy = load_hierarchy(args.hierarchy)
    params = load_model(args.checkpoint, hierarchy)
    image = read_pgm(args.image)[:, :, None]
    started = time.perf_counter()
    mesh = predict_mesh(image, params)
    latency = time.perf_counter() - started
    logger.info('inference done latency_seconds=%.4f vertices=%d', latency, mesh.vertex_count)
    write_mesh(args.output, mesh)
    return 0
