"""Grayscale PGM images (P2 ascii, P5 binary) as float arrays in [0, 1], read and written through Pillow."""
import io
from pathlib import Path

import numpy as np
from PIL import Image

from instantiation_net.exceptions import DimensionError, ParseError
from instantiation_net.fileio.atomic import atomic_write_bytes

PGM_MAGIC = (b'P2', b'P5')
# Pillow widens 8-bit maps to mode L and anything deeper to mode I scaled to 16 bits
MODE_FULL_SCALE = {'L': 255.0, 'I': 65535.0}


def _check_payload(im: Image.Image, blob: bytes, path) -> None:
    tile = im.tile[0]
    if tile.codec_name == 'ppm_plain':
        return
    width, height = im.size
    expected = width * height * (1 if im.mode == 'L' else 2)
    found = len(blob) - tile.offset
    if found < expected:
        raise ParseError(path, f'truncated payload: expected {expected} bytes, found {found}')


def parse_pgm(blob: bytes, path='<bytes>') -> np.ndarray:
    if blob[:2] not in PGM_MAGIC:
        raise ParseError(path, f'bad magic {blob[:2]!r}, expected P2 or P5')
    try:
        with Image.open(io.BytesIO(blob), formats=['PPM']) as im:
            _check_payload(im, blob, path)
            im.load()
            full_scale = MODE_FULL_SCALE[im.mode]
            values = np.asarray(im, dtype=np.float64)
    except ParseError:
        raise
    except (OSError, ValueError, SyntaxError) as e:
        raise ParseError(path, f'unreadable PGM: {e}') from e
    return values / full_scale


def format_pgm(image: np.ndarray, maxval: int = 255) -> bytes:
    """Binary P5 bytes for an H x W image with values clipped to [0, 1]."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise DimensionError(f'expected an H x W image, got shape {image.shape}')
    if maxval not in (255, 65535):
        raise DimensionError(f'maxval must be 255 or 65535, got {maxval}')
    samples = np.rint(np.clip(image, 0.0, 1.0) * maxval)
    im = Image.fromarray(samples.astype(np.uint8 if maxval == 255 else np.int32))
    buffer = io.BytesIO()
    im.save(buffer, format='PPM')
    return buffer.getvalue()


def read_pgm(path: Path) -> np.ndarray:
    return parse_pgm(Path(path).read_bytes(), path)


def write_pgm(path: Path, image: np.ndarray, maxval: int = 255) -> None:
    atomic_write_bytes(path, format_pgm(image, maxval))
