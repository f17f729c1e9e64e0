"""Depth-shaded silhouette rendering by a small z-buffer rasteriser.

Depth is the coordinate along the view axis. The camera looks from the negative
side, so the nearest surface has the smallest depth and renders brightest:
intensity = (far - depth) / (far - near), zero outside the silhouette.
"""
import numpy as np

from instantiation_net.exceptions import FrustumError
from instantiation_net.graph.mesh import Mesh
from instantiation_net.schemes.shape import ProjectionKind, RenderSpec

# image (horizontal, vertical) axes for each view axis
_PLANE_AXES = {0: (1, 2), 1: (0, 2), 2: (0, 1)}
_INSIDE_TOLERANCE = 1e-12


def image_extents(spec: RenderSpec) -> tuple[float, float]:
    """Half extents (horizontal, vertical) of the image plane in mm."""
    return spec.half_extent_mm * spec.width / spec.height, spec.half_extent_mm


def _check_frustum(depth: np.ndarray, u: np.ndarray, v: np.ndarray, spec: RenderSpec) -> None:
    if depth.min() < spec.near_mm or depth.max() > spec.far_mm:
        raise FrustumError(
            f'depth range [{depth.min():.3f}, {depth.max():.3f}] leaves [{spec.near_mm}, {spec.far_mm}]'
        )
    half_u, half_v = image_extents(spec)
    if np.abs(u).max() > half_u or np.abs(v).max() > half_v:
        raise FrustumError(f'mesh extends beyond the image plane +-{half_u:.3f} x +-{half_v:.3f} mm')


def render_projection(mesh: Mesh, spec: RenderSpec) -> np.ndarray:
    """H x W x 1 depth-shaded image of `mesh` in [0, 1]."""
    axis = spec.view_axis.index
    across, up = _PLANE_AXES[axis]
    depth = mesh.vertices[:, axis]
    u = mesh.vertices[:, across]
    v = mesh.vertices[:, up]

    perspective = spec.projection is ProjectionKind.PERSPECTIVE
    if perspective:
        if spec.camera_distance_mm <= -spec.near_mm:
            raise FrustumError(
                f'camera at {-spec.camera_distance_mm} mm is not in front of the near plane {spec.near_mm} mm'
            )
        distance = depth + spec.camera_distance_mm
        u = u * spec.camera_distance_mm / distance
        v = v * spec.camera_distance_mm / distance
    _check_frustum(depth, u, v, spec)

    pixel = 2.0 * spec.half_extent_mm / spec.height
    # continuous pixel coordinates with pixel centres on integers
    cols = u / pixel + spec.width / 2.0 - 0.5
    rows = spec.height / 2.0 - 0.5 - v / pixel
    zbuffer = np.full((spec.height, spec.width), np.inf)

    for face in mesh.faces:
        fc, fr = cols[face], rows[face]
        area = (fc[1] - fc[0]) * (fr[2] - fr[0]) - (fc[2] - fc[0]) * (fr[1] - fr[0])
        if area == 0.0:
            continue
        c0 = max(int(np.ceil(fc.min())), 0)
        c1 = min(int(np.floor(fc.max())), spec.width - 1)
        r0 = max(int(np.ceil(fr.min())), 0)
        r1 = min(int(np.floor(fr.max())), spec.height - 1)
        if c0 > c1 or r0 > r1:
            continue
        grid_r, grid_c = np.mgrid[r0:r1 + 1, c0:c1 + 1].astype(np.float64)
        w0 = ((fc[1] - grid_c) * (fr[2] - grid_r) - (fc[2] - grid_c) * (fr[1] - grid_r)) / area
        w1 = ((fc[2] - grid_c) * (fr[0] - grid_r) - (fc[0] - grid_c) * (fr[2] - grid_r)) / area
        w2 = 1.0 - w0 - w1
        inside = (w0 >= -_INSIDE_TOLERANCE) & (w1 >= -_INSIDE_TOLERANCE) & (w2 >= -_INSIDE_TOLERANCE)
        if not inside.any():
            continue
        d = depth[face]
        if perspective:
            z = d + spec.camera_distance_mm
            pixel_depth = 1.0 / (w0 / z[0] + w1 / z[1] + w2 / z[2]) - spec.camera_distance_mm
        else:
            pixel_depth = w0 * d[0] + w1 * d[1] + w2 * d[2]
        window = zbuffer[r0:r1 + 1, c0:c1 + 1]
        np.minimum(window, np.where(inside, pixel_depth, np.inf), out=window)

    covered = np.isfinite(zbuffer)
    image = np.zeros_like(zbuffer)
    image[covered] = (spec.far_mm - zbuffer[covered]) / (spec.far_mm - spec.near_mm)
    return np.clip(image, 0.0, 1.0)[:, :, None]
