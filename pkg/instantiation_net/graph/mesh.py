import hashlib
from functools import cached_property

import numpy as np
import scipy.sparse
from scipy.sparse.csgraph import connected_components
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from instantiation_net.exceptions import MeshError


class Mesh(BaseModel):
    """Triangle mesh: M x 3 vertex coordinates (mm) and F x 3 vertex-index faces.

    Adjacency is always derived from the faces: A_ij = 1 iff i and j share a face edge.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    vertices: np.ndarray
    faces: np.ndarray

    @field_validator('vertices', mode='before')
    @classmethod
    def vertices_as_matrix(cls, v):
        v = np.array(v, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError(f'vertices must be an M x 3 matrix, got shape {v.shape}')
        if not np.all(np.isfinite(v)):
            raise ValueError('vertices must be finite')
        return v

    @field_validator('faces', mode='before')
    @classmethod
    def faces_as_triples(cls, f):
        f = np.array(f, dtype=np.int64).reshape(-1, 3) if np.size(f) else np.zeros((0, 3), dtype=np.int64)
        return f

    @model_validator(mode='after')
    def faces_reference_vertices(self):
        if self.faces.size:
            if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
                raise ValueError(f'face index out of range for {len(self.vertices)} vertices')
            f = self.faces
            degenerate = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
            if degenerate.any():
                raise ValueError(f'degenerate face at index {int(np.flatnonzero(degenerate)[0])}')
        return self

    @classmethod
    def create(cls, vertices, faces) -> 'Mesh':
        """Construct, reporting invariant violations as MeshError."""
        try:
            return cls(vertices=vertices, faces=faces)
        except ValidationError as e:
            raise MeshError(str(e)) from e

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted (i, j) pairs with i < j."""
        f = self.faces
        pairs = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        pairs = np.sort(pairs, axis=1)
        return np.unique(pairs, axis=0) if len(pairs) else np.zeros((0, 2), dtype=np.int64)

    @cached_property
    def adjacency(self) -> scipy.sparse.csr_matrix:
        m = self.vertex_count
        e = self.edges
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        a = scipy.sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(m, m))
        a.sort_indices()
        return a

    @property
    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    def is_connected(self) -> bool:
        if self.vertex_count == 0:
            return False
        count, _ = connected_components(self.adjacency, directed=False)
        return count == 1

    def with_vertices(self, vertices) -> 'Mesh':
        vertices = np.asarray(vertices, dtype=np.float64)
        if vertices.shape != self.vertices.shape:
            raise MeshError(f'new vertices {vertices.shape} do not match {self.vertices.shape}')
        return Mesh(vertices=vertices, faces=self.faces)

    def same_connectivity(self, other: 'Mesh') -> bool:
        return self.vertex_count == other.vertex_count and np.array_equal(self.faces, other.faces)

    def content_hash(self) -> str:
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.vertices, dtype='<f8').tobytes())
        digest.update(np.ascontiguousarray(self.faces, dtype='<i8').tobytes())
        return digest.hexdigest()
