import numpy as np
import trimesh
from scipy.spatial import ConvexHull

from instantiation_net.exceptions import MeshError
from instantiation_net.graph.mesh import Mesh


def icosphere(subdivisions: int = 2, radius: float = 1.0) -> Mesh:
    """Geodesic sphere with 10 * 4**subdivisions + 2 vertices."""
    sphere = trimesh.creation.icosphere(subdivisions=subdivisions, radius=radius)
    return Mesh.create(np.asarray(sphere.vertices), np.asarray(sphere.faces))


def random_hull_mesh(n: int, rng: np.random.Generator, radius: float = 1.0) -> Mesh:
    """Closed connected triangle mesh: the convex hull of `n` random points on a sphere."""
    if n < 4:
        raise MeshError(f'a closed hull needs at least 4 points, got {n}')
    points = rng.standard_normal((n, 3))
    points *= radius / np.linalg.norm(points, axis=1, keepdims=True)
    hull = ConvexHull(points)
    if len(hull.vertices) != n:
        raise MeshError(f'only {len(hull.vertices)} of {n} points lie on the hull')
    faces = hull.simplices.copy()
    # hull.equations holds the outward normal of each facet
    inward = np.einsum('ij,ij->i', trimesh.triangles.cross(points[faces]), hull.equations[:, :3]) < 0
    faces[inward] = faces[inward][:, ::-1]
    return Mesh.create(points, faces)
