"""Multi-resolution mesh hierarchy with sparse down- and up-sampling maps."""
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse
from trimesh.triangles import closest_point, points_to_barycentric

from instantiation_net.autodiff.ops import sparse_matmul
from instantiation_net.autodiff.tensor import Tensor
from instantiation_net.exceptions import DimensionError, MeshTooSmallError, ParseError
from instantiation_net.fileio.atomic import atomic_write_bytes
from instantiation_net.fileio.mesh_io import format_off, parse_off
from instantiation_net.graph.mesh import Mesh
from instantiation_net.graph.spectral import LaplacianBundle, build_laplacian
from instantiation_net.sampling.qem import SimplifyStrategy, qem_simplify

logger = logging.getLogger(__name__)

COARSEST_MINIMUM = 4
_POINT_CHUNK = 256


@dataclass(frozen=True)
class SamplingHierarchy:
    levels: list[Mesh]
    down_maps: list[scipy.sparse.csr_matrix]
    up_maps: list[scipy.sparse.csr_matrix]
    stride: int
    bundles: list[LaplacianBundle]
    template_hash: str

    @property
    def level_counts(self) -> list[int]:
        return [m.vertex_count for m in self.levels]

    @property
    def depth(self) -> int:
        return len(self.down_maps)


def level_counts(vertex_count: int, stride: int, levels: int = 4) -> list[int]:
    """count_{l+1} = max(ceil(count_l / S), 4)."""
    if stride < 2:
        raise DimensionError(f'stride must be at least 2, got {stride}')
    minimum = COARSEST_MINIMUM * stride
    if vertex_count < minimum:
        raise MeshTooSmallError(vertex_count, minimum)
    counts = [vertex_count]
    for _ in range(levels):
        counts.append(max(math.ceil(counts[-1] / stride), COARSEST_MINIMUM))
    return counts


def selection_matrix(kept: np.ndarray, fine_count: int) -> scipy.sparse.csr_matrix:
    rows = np.arange(len(kept))
    return scipy.sparse.csr_matrix((np.ones(len(kept)), (rows, kept)), shape=(len(kept), fine_count))


def nearest_faces(points: np.ndarray, mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Index of the closest triangle (lowest index on ties) and the closest point on it."""
    triangles = mesh.vertices[mesh.faces]
    n_faces = len(triangles)
    best_face = np.empty(len(points), dtype=np.int64)
    best_point = np.empty((len(points), 3))
    for start in range(0, len(points), _POINT_CHUNK):
        chunk = points[start:start + _POINT_CHUNK]
        tiled_points = np.repeat(chunk, n_faces, axis=0)
        tiled_triangles = np.tile(triangles, (len(chunk), 1, 1))
        closest = closest_point(tiled_triangles, tiled_points)
        distance = np.linalg.norm(closest - tiled_points, axis=1).reshape(len(chunk), n_faces)
        face = np.argmin(distance, axis=1)
        best_face[start:start + len(chunk)] = face
        best_point[start:start + len(chunk)] = closest.reshape(len(chunk), n_faces, 3)[np.arange(len(chunk)), face]
    return best_face, best_point


def upsampling_matrix(fine_vertices: np.ndarray, coarse: Mesh, kept: np.ndarray) -> scipy.sparse.csr_matrix:
    """Q mapping coarse features back to the fine level.

    Retained vertices copy their coarse counterpart. Discarded vertices take barycentric
    weights of the closest point on the nearest coarse triangle, clipped to [0, 1] and
    renormalised.
    """
    fine_count = len(fine_vertices)
    retained = np.zeros(fine_count, dtype=bool)
    retained[kept] = True
    rows = [np.asarray(kept)]
    cols = [np.arange(len(kept))]
    vals = [np.ones(len(kept))]

    discarded = np.flatnonzero(~retained)
    if discarded.size:
        face, closest = nearest_faces(fine_vertices[discarded], coarse)
        corners = coarse.faces[face]
        weights = points_to_barycentric(coarse.vertices[corners], closest)
        weights = np.clip(np.nan_to_num(weights, nan=0.0), 0.0, 1.0)
        total = weights.sum(axis=1)
        for r in np.flatnonzero(total == 0):
            # zero-area triangle: fall back to its closest corner
            d = np.linalg.norm(coarse.vertices[corners[r]] - closest[r], axis=1)
            weights[r] = 0.0
            weights[r, np.argmin(d)] = 1.0
        weights /= weights.sum(axis=1, keepdims=True)
        rows.append(np.repeat(discarded, 3))
        cols.append(corners.ravel())
        vals.append(weights.ravel())

    q = scipy.sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(fine_count, len(kept)),
    )
    q.sort_indices()
    return q


def build_hierarchy(mesh: Mesh, stride: int, levels: int = 4,
                    strategy: SimplifyStrategy = SimplifyStrategy.HEAP) -> SamplingHierarchy:
    counts = level_counts(mesh.vertex_count, stride, levels)
    meshes = [mesh]
    down_maps = []
    up_maps = []
    for target in counts[1:]:
        fine = meshes[-1]
        result = qem_simplify(fine, target, strategy)
        down_maps.append(selection_matrix(result.kept, fine.vertex_count))
        up_maps.append(upsampling_matrix(fine.vertices, result.mesh, result.kept))
        meshes.append(result.mesh)
    logger.info('hierarchy built counts=%s stride=%d', ','.join(map(str, counts)), stride)
    return SamplingHierarchy(
        levels=meshes,
        down_maps=down_maps,
        up_maps=up_maps,
        stride=stride,
        bundles=[build_laplacian(m) for m in meshes],
        template_hash=mesh.content_hash(),
    )


def upsample(q: scipy.sparse.spmatrix, features: Tensor) -> Tensor:
    if features.ndim != 2 or features.shape[0] != q.shape[1]:
        raise DimensionError(f'upsample: map {q.shape} cannot take features {features.shape}')
    return sparse_matmul(q, features)


def downsample(d: scipy.sparse.spmatrix, features: Tensor) -> Tensor:
    if features.ndim != 2 or features.shape[0] != d.shape[1]:
        raise DimensionError(f'downsample: map {d.shape} cannot take features {features.shape}')
    return sparse_matmul(d, features)


def _pack_sparse(archive: dict, key: str, matrix: scipy.sparse.spmatrix) -> None:
    coo = matrix.tocoo()
    archive[f'{key}_rows'] = coo.row.astype(np.int64)
    archive[f'{key}_cols'] = coo.col.astype(np.int64)
    archive[f'{key}_vals'] = coo.data.astype(np.float64)
    archive[f'{key}_shape'] = np.array(matrix.shape, dtype=np.int64)


def _unpack_sparse(archive, key: str) -> scipy.sparse.csr_matrix:
    shape = tuple(int(s) for s in archive[f'{key}_shape'])
    matrix = scipy.sparse.csr_matrix(
        (archive[f'{key}_vals'], (archive[f'{key}_rows'], archive[f'{key}_cols'])), shape=shape
    )
    matrix.sort_indices()
    return matrix


def save_hierarchy(path: Path, hierarchy: SamplingHierarchy) -> None:
    archive = {
        'template_hash': np.array(hierarchy.template_hash),
        'stride': np.array(hierarchy.stride, dtype=np.int64),
        'depth': np.array(hierarchy.depth, dtype=np.int64),
    }
    for index, level in enumerate(hierarchy.levels):
        archive[f'level_{index}_off'] = np.frombuffer(format_off(level).encode('ascii'), dtype=np.uint8)
    for index, (d, q) in enumerate(zip(hierarchy.down_maps, hierarchy.up_maps)):
        _pack_sparse(archive, f'down_{index}', d)
        _pack_sparse(archive, f'up_{index}', q)
    buffer = io.BytesIO()
    np.savez(buffer, **archive)
    atomic_write_bytes(path, buffer.getvalue())


def load_hierarchy(path: Path) -> SamplingHierarchy:
    try:
        with np.load(path, allow_pickle=False) as archive:
            depth = int(archive['depth'])
            levels = [
                parse_off(archive[f'level_{i}_off'].tobytes().decode('ascii'), f'{path}[level_{i}]')
                for i in range(depth + 1)
            ]
            down_maps = [_unpack_sparse(archive, f'down_{i}') for i in range(depth)]
            up_maps = [_unpack_sparse(archive, f'up_{i}') for i in range(depth)]
            stride = int(archive['stride'])
            template_hash = str(archive['template_hash'])
    except (KeyError, ValueError, OSError) as e:
        raise ParseError(path, f'unreadable hierarchy sidecar: {e}') from e
    return SamplingHierarchy(
        levels=levels,
        down_maps=down_maps,
        up_maps=up_maps,
        stride=stride,
        bundles=[build_laplacian(m) for m in levels],
        template_hash=template_hash,
    )


def sidecar_path(cache_dir: Path, template: Mesh, stride: int, levels: int) -> Path:
    return Path(cache_dir) / f'hierarchy_{template.content_hash()[:16]}_s{stride}_l{levels}.npz'


def load_or_build_hierarchy(template: Mesh, stride: int, levels: int = 4,
                            cache_dir: Path | None = None) -> SamplingHierarchy:
    """Reuse a cached sidecar whose key matches the template, otherwise build and cache."""
    if cache_dir is None:
        return build_hierarchy(template, stride, levels)
    path = sidecar_path(cache_dir, template, stride, levels)
    if path.exists():
        try:
            cached = load_hierarchy(path)
        except ParseError as e:
            logger.warning('hierarchy sidecar ignored path=%s reason=%s', path, e.detail)
        else:
            if (cached.template_hash == template.content_hash() and cached.stride == stride
                    and cached.depth == levels):
                logger.info('hierarchy loaded path=%s', path)
                return cached
            logger.warning('hierarchy sidecar key mismatch path=%s', path)
    hierarchy = build_hierarchy(template, stride, levels)
    save_hierarchy(path, hierarchy)
    logger.info('hierarchy cached path=%s', path)
    return hierarchy
