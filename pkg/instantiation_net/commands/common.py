import argparse
import csv
import io
import logging
from pathlib import Path
from typing import Iterable, Sequence

from instantiation_net.fileio.atomic import atomic_write_text

logger = logging.getLogger(__name__)


def add_common_flags(parser: argparse.ArgumentParser, outputs: bool = True) -> None:
    parser.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    if outputs:
        parser.add_argument('--force', action='store_true', help='overwrite existing outputs')


def skip_existing(path: Path, force: bool) -> bool:
    """True when `path` exists and must be left alone."""
    if Path(path).exists() and not force:
        logger.warning('output exists, skipping path=%s (pass --force to overwrite)', path)
        return True
    return False


def format_float(value: float) -> str:
    return f'{value:.17g}'


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    atomic_write_text(path, buffer.getvalue())
    logger.info('csv written path=%s', path)


def fold_stem(fold_index: int) -> str:
    return f'fold_{fold_index:02d}'


def parse_index_list(text: str | None) -> list[int] | None:
    if not text:
        return None
    return [int(part) for part in text.split(',') if part.strip()]
