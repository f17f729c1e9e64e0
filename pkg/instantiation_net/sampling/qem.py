"""Quadric error metric edge-collapse simplification.

Plane quadrics are accumulated per vertex from the faces around it. Collapses are
ordered by the cost of the optimal contraction point, but the surviving vertex keeps
its own coordinates so a simplified mesh is always a subset of the original vertices.
"""
import heapq
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from instantiation_net.exceptions import DimensionError, DisconnectedMeshError, SimplificationError
from instantiation_net.graph.mesh import Mesh

logger = logging.getLogger(__name__)

SINGULAR_DETERMINANT = 1e-12
MIN_TARGET = 4


class SimplifyStrategy(str, Enum):
    HEAP = 'heap'
    RESCAN = 'rescan'


@dataclass(frozen=True)
class SimplificationResult:
    mesh: Mesh
    kept: np.ndarray
    members: list[frozenset[int]]
    costs: list[float]


def face_quadrics(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Per-vertex sum of p p^T over incident face planes p = (n, -n.v0)."""
    quadrics = np.zeros((len(vertices), 4, 4))
    tri = vertices[faces]
    normals = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    norms = np.linalg.norm(normals, axis=1)
    usable = norms > 0
    normals = normals[usable] / norms[usable, None]
    planes = np.concatenate([normals, -np.einsum('ij,ij->i', normals, tri[usable, 0])[:, None]], axis=1)
    outer = planes[:, :, None] * planes[:, None, :]
    for corner in range(3):
        np.add.at(quadrics, faces[usable, corner], outer)
    return quadrics


def quadric_error(quadric: np.ndarray, position: np.ndarray) -> float:
    h = np.append(position, 1.0)
    return max(float(h @ quadric @ h), 0.0)


def optimal_position(quadric: np.ndarray, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    """Minimiser of the quadric, or the best of a, b and their midpoint when singular."""
    system = quadric[:3, :3]
    if abs(np.linalg.det(system)) >= SINGULAR_DETERMINANT:
        position = np.linalg.solve(system, -quadric[:3, 3])
        return position, quadric_error(quadric, position)
    candidates = (a, b, 0.5 * (a + b))
    errors = [quadric_error(quadric, c) for c in candidates]
    best = int(np.argmin(errors))
    return candidates[best], errors[best]


class _CollapseState:
    def __init__(self, mesh: Mesh):
        m = mesh.vertex_count
        self.positions = mesh.vertices
        self.faces = mesh.faces.copy()
        self.face_alive = np.ones(len(self.faces), dtype=bool)
        self.face_count = len(self.faces)
        self.vertex_alive = np.ones(m, dtype=bool)
        self.alive_count = m
        self.quadrics = face_quadrics(mesh.vertices, mesh.faces)
        self.members = [{i} for i in range(m)]
        self.version = np.zeros(m, dtype=np.int64)
        self.vertex_faces = [set() for _ in range(m)]
        self.neighbors = [set() for _ in range(m)]
        for f, (i, j, k) in enumerate(self.faces):
            for v in (i, j, k):
                self.vertex_faces[v].add(f)
        for i, j in mesh.edges:
            self.neighbors[i].add(int(j))
            self.neighbors[j].add(int(i))

    def edges(self):
        for i in np.flatnonzero(self.vertex_alive):
            for j in sorted(self.neighbors[i]):
                if j > i:
                    yield int(i), j

    def is_boundary(self, v: int) -> bool:
        counts = {}
        for f in self.vertex_faces[v]:
            for u in self.faces[f]:
                if u != v:
                    counts[u] = counts.get(u, 0) + 1
        return any(c == 1 for c in counts.values())

    def is_valid(self, a: int, b: int) -> bool:
        if not (self.vertex_alive[a] and self.vertex_alive[b]) or b not in self.neighbors[a]:
            return False
        shared = self.vertex_faces[a] & self.vertex_faces[b]
        if len(shared) > 2 or self.face_count - len(shared) < 1:
            return False
        apexes = {int(u) for f in shared for u in self.faces[f] if u != a and u != b}
        if self.neighbors[a] & self.neighbors[b] != apexes:
            return False
        if len(shared) == 2 and self.is_boundary(a) and self.is_boundary(b):
            return False
        # the relabelled faces of b must not duplicate a face of a
        faces_a = {frozenset(int(u) for u in self.faces[f]) for f in self.vertex_faces[a] - shared}
        for f in self.vertex_faces[b] - shared:
            relabelled = frozenset(a if u == b else int(u) for u in self.faces[f])
            if relabelled in faces_a:
                return False
        return True

    def cost(self, a: int, b: int) -> float:
        _, error = optimal_position(self.quadrics[a] + self.quadrics[b], self.positions[a], self.positions[b])
        return error

    def survivor(self, a: int, b: int) -> tuple[int, int]:
        quadric = self.quadrics[a] + self.quadrics[b]
        if quadric_error(quadric, self.positions[b]) < quadric_error(quadric, self.positions[a]):
            return b, a
        return a, b

    def collapse(self, a: int, b: int) -> int:
        """Contract edge (a, b); returns the surviving vertex."""
        keep, drop = self.survivor(a, b)
        shared = self.vertex_faces[keep] & self.vertex_faces[drop]
        for f in shared:
            self.face_alive[f] = False
            self.face_count -= 1
            for u in self.faces[f]:
                self.vertex_faces[u].discard(f)
        for f in self.vertex_faces[drop]:
            self.faces[f][self.faces[f] == drop] = keep
            self.vertex_faces[keep].add(f)
        self.vertex_faces[drop] = set()
        for n in self.neighbors[drop]:
            self.neighbors[n].discard(drop)
            if n != keep:
                self.neighbors[n].add(keep)
                self.neighbors[keep].add(n)
        self.neighbors[drop] = set()
        self.quadrics[keep] += self.quadrics[drop]
        self.members[keep] |= self.members[drop]
        self.vertex_alive[drop] = False
        self.alive_count -= 1
        return keep


def _simplify_heap(state: _CollapseState, target: int) -> list[float]:
    heap = [(state.cost(i, j), i, j, 0, 0) for i, j in state.edges()]
    heapq.heapify(heap)
    costs = []
    while state.alive_count > target:
        if not heap:
            raise SimplificationError('no valid edge collapse remains', state.alive_count)
        cost, i, j, vi, vj = heapq.heappop(heap)
        if state.version[i] != vi or state.version[j] != vj or not state.is_valid(i, j):
            continue
        keep = state.collapse(i, j)
        costs.append(cost)
        ring = {keep} | state.neighbors[keep]
        for v in ring:
            state.version[v] += 1
        requeued = set()
        for u in ring:
            for w in state.neighbors[u]:
                edge = (min(u, w), max(u, w))
                if edge not in requeued:
                    requeued.add(edge)
                    x, y = edge
                    heapq.heappush(heap, (state.cost(x, y), x, y, int(state.version[x]), int(state.version[y])))
    return costs


def _simplify_rescan(state: _CollapseState, target: int) -> list[float]:
    costs = []
    while state.alive_count > target:
        candidates = [(state.cost(i, j), i, j) for i, j in state.edges() if state.is_valid(i, j)]
        if not candidates:
            raise SimplificationError('no valid edge collapse remains', state.alive_count)
        cost, i, j = min(candidates)
        state.collapse(i, j)
        costs.append(cost)
    return costs


def qem_simplify(mesh: Mesh, target_count: int,
                 strategy: SimplifyStrategy = SimplifyStrategy.HEAP) -> SimplificationResult:
    """Collapse minimum-cost valid edges until `target_count` vertices remain."""
    if target_count < MIN_TARGET:
        raise DimensionError(f'target_count must be at least {MIN_TARGET}, got {target_count}')
    if target_count > mesh.vertex_count:
        raise DimensionError(f'target_count {target_count} exceeds mesh size {mesh.vertex_count}')
    if not mesh.is_connected():
        raise DisconnectedMeshError(f'cannot simplify a disconnected mesh of {mesh.vertex_count} vertices')

    state = _CollapseState(mesh)
    if strategy is SimplifyStrategy.HEAP:
        costs = _simplify_heap(state, target_count)
    else:
        costs = _simplify_rescan(state, target_count)

    kept = np.flatnonzero(state.vertex_alive)
    remap = np.full(mesh.vertex_count, -1, dtype=np.int64)
    remap[kept] = np.arange(len(kept))
    faces = remap[state.faces[state.face_alive]]
    simplified = Mesh.create(mesh.vertices[kept], faces)
    if not simplified.is_connected():
        raise SimplificationError('simplified mesh is disconnected', len(kept))
    logger.debug('qem simplified vertices=%d target=%d collapses=%d strategy=%s',
                 mesh.vertex_count, target_count, len(costs), strategy.value)
    return SimplificationResult(
        mesh=simplified,
        kept=kept,
        members=[frozenset(state.members[k]) for k in kept],
        costs=costs,
    )
