"""Binary parameter checkpoints.

Layout, all integers little-endian:

    8 bytes   magic b"INETCKPT"
    4 bytes   uint32 format version (1)
    8 bytes   uint64 manifest length L
    L bytes   UTF-8 JSON manifest (CheckpointManifest)
    ...       float64 payload; each manifest entry gives its byte offset from the payload start
"""
import struct
from pathlib import Path

import numpy as np

from instantiation_net.exceptions import ParseError
from instantiation_net.fileio.atomic import atomic_write_bytes
from instantiation_net.schemes.report import CheckpointManifest, TensorEntry

MAGIC = b'INETCKPT'
VERSION = 1
_HEADER = struct.Struct('<8sIQ')


def encode_checkpoint(arrays: dict[str, tuple[str, np.ndarray]], **manifest_fields) -> bytes:
    entries = []
    chunks = []
    offset = 0
    for name, (kind, array) in arrays.items():
        raw = np.ascontiguousarray(array, dtype='<f8').tobytes()
        entries.append(TensorEntry(name=name, kind=kind, shape=list(array.shape), offset=offset))
        chunks.append(raw)
        offset += len(raw)
    manifest = CheckpointManifest(version=VERSION, entries=entries, **manifest_fields)
    manifest_bytes = manifest.model_dump_json().encode('utf-8')
    return _HEADER.pack(MAGIC, VERSION, len(manifest_bytes)) + manifest_bytes + b''.join(chunks)


def save_checkpoint(path: Path, arrays: dict[str, tuple[str, np.ndarray]], **manifest_fields) -> None:
    atomic_write_bytes(path, encode_checkpoint(arrays, **manifest_fields))


def load_checkpoint(path: Path) -> tuple[CheckpointManifest, dict[str, np.ndarray]]:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise ParseError(path, f'expected at least {_HEADER.size} header bytes, found {len(blob)}')
    magic, version, manifest_len = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ParseError(path, f'bad magic {magic!r}')
    if version != VERSION:
        raise ParseError(path, f'unsupported checkpoint version {version}')
    start = _HEADER.size + manifest_len
    if len(blob) < start:
        raise ParseError(path, f'manifest truncated: expected {start} bytes, found {len(blob)}')
    manifest = CheckpointManifest.model_validate_json(blob[_HEADER.size:start])
    payload = memoryview(blob)[start:]
    arrays = {}
    for entry in manifest.entries:
        count = int(np.prod(entry.shape, dtype=np.int64))
        end = entry.offset + 8 * count
        if end > len(payload):
            raise ParseError(path, f'payload for {entry.name} needs {end} bytes, found {len(payload)}')
        raw = np.frombuffer(payload[entry.offset:end], dtype='<f8')
        arrays[entry.name] = raw.astype(np.float64).reshape(entry.shape)
    return manifest, arrays
