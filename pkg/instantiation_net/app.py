import argparse
import logging
import sys

from instantiation_net.commands import checks, data, inference, training
from instantiation_net.exceptions import InstantiationNetError
from instantiation_net.logging_setup import configure_logging

logger = logging.getLogger(__name__)

COMMANDS = (data, training, inference, checks)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='instantiation-net',
                                     description='Single-image 3D mesh reconstruction with a spectral mesh decoder.')
    subparsers = parser.add_subparsers(dest='command', required=True, metavar='command')
    for module in COMMANDS:
        module.register(subparsers)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    logger.info('command start command=%s', args.command)
    try:
        status = args.handler(args)
    except InstantiationNetError as e:
        logger.error('command failed command=%s error=%s detail=%s', args.command, type(e).__name__, e.detail)
        return e.exit_code
    logger.info('command done command=%s status=%d', args.command, status)
    return status


if __name__ == '__main__':
    sys.exit(main())
