"""Image/mesh training pairs and their on-disk dataset directory.

A dataset directory holds ``frame_XX.off`` meshes, ``frame_XX.pgm`` 16-bit images
and ``manifest.json`` echoing the generating spec, the seed and a SHA-256 per file.
"""
import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from instantiation_net.exceptions import MeshError, ParseError
from instantiation_net.fileio.atomic import atomic_write_bytes, atomic_write_text
from instantiation_net.fileio.mesh_io import format_off, read_off
from instantiation_net.fileio.pgm import format_pgm, read_pgm
from instantiation_net.graph.mesh import Mesh
from instantiation_net.schemes.report import DatasetManifest
from instantiation_net.schemes.shape import ShapeCycleSpec
from instantiation_net.synthetic.cycle import generate_cycle
from instantiation_net.synthetic.render import render_projection

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.json'
IMAGE_MAXVAL = 65535


@dataclass(frozen=True)
class DatasetPair:
    image: np.ndarray
    mesh: Mesh
    frame_index: int

    def content_checksum(self) -> str:
        """Hash of the image and mesh alone, blind to the frame index."""
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.image, dtype='<f8').tobytes())
        digest.update(self.mesh.content_hash().encode('ascii'))
        return digest.hexdigest()

    def checksum(self) -> str:
        digest = hashlib.sha256()
        digest.update(str(self.frame_index).encode('ascii'))
        digest.update(self.content_checksum().encode('ascii'))
        return digest.hexdigest()


def frame_stem(t: int) -> str:
    return f'frame_{t:02d}'


def make_dataset(spec: ShapeCycleSpec, seed: int) -> list[DatasetPair]:
    meshes = generate_cycle(spec, seed)
    return [DatasetPair(render_projection(m, spec.render), m, t) for t, m in enumerate(meshes)]


def write_dataset(directory: Path, spec: ShapeCycleSpec, seed: int, pairs: list[DatasetPair]) -> DatasetManifest:
    directory = Path(directory)
    checksums = {}
    for pair in pairs:
        stem = frame_stem(pair.frame_index)
        files = {
            f'{stem}.off': format_off(pair.mesh).encode('ascii'),
            f'{stem}.pgm': format_pgm(pair.image[:, :, 0], maxval=IMAGE_MAXVAL),
        }
        for name, payload in files.items():
            atomic_write_bytes(directory / name, payload)
            checksums[name] = hashlib.sha256(payload).hexdigest()
    manifest = DatasetManifest(spec=spec, seed=seed, frames=len(pairs), checksums=checksums)
    atomic_write_text(directory / MANIFEST_NAME, manifest.model_dump_json(indent=2))
    logger.info('dataset written dir=%s frames=%d', directory, len(pairs))
    return manifest


def load_dataset(directory: Path) -> tuple[list[DatasetPair], DatasetManifest]:
    """Read and verify a dataset directory; every frame must share the first frame's faces."""
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    try:
        manifest = DatasetManifest.model_validate_json(manifest_path.read_bytes())
    except OSError as e:
        raise ParseError(manifest_path, f'cannot read manifest: {e.strerror}') from e
    except ValidationError as e:
        raise ParseError(manifest_path, f'invalid manifest: {e}') from e

    for name, expected in manifest.checksums.items():
        path = directory / name
        try:
            actual = hashlib.sha256(path.read_bytes()).hexdigest()
        except OSError as e:
            raise ParseError(path, f'cannot read dataset file: {e.strerror}') from e
        if actual != expected:
            raise ParseError(path, f'checksum mismatch: manifest {expected[:12]}, file {actual[:12]}')

    pairs = []
    for t in range(manifest.frames):
        stem = frame_stem(t)
        mesh = read_off(directory / f'{stem}.off')
        image = read_pgm(directory / f'{stem}.pgm')[:, :, None]
        if pairs and not mesh.same_connectivity(pairs[0].mesh):
            raise MeshError(f'{stem}.off does not share the connectivity of {frame_stem(0)}.off')
        pairs.append(DatasetPair(image=image, mesh=mesh, frame_index=t))
    logger.info('dataset loaded dir=%s frames=%d', directory, len(pairs))
    return pairs, manifest
