"""A periodic "beating" deformation of a base sphere.

Frame t of a T-frame cycle applies, at phase phi = 2 pi (t mod T) / T,

    x' = S(phi) x (1 + b sin(phi + psi) P_l(x_hat . e)) + noise

with S(phi) = diag(1 + a_i sin phi), P_l the Legendre polynomial of degree l and
e the bulge axis. Every frame shares the base connectivity.
"""
import logging

import numpy as np
from numpy.polynomial import legendre

from instantiation_net.exceptions import AmplitudeError
from instantiation_net.graph.mesh import Mesh
from instantiation_net.schemes.shape import MAX_AMPLITUDE, ShapeCycleSpec
from instantiation_net.synthetic.shapes import icosphere

logger = logging.getLogger(__name__)


def frame_phase(t: int, frames: int) -> float:
    return 2.0 * np.pi * (t % frames) / frames


def base_mesh(spec: ShapeCycleSpec) -> Mesh:
    return icosphere(spec.subdivisions, spec.radius_mm)


def check_amplitudes(spec: ShapeCycleSpec) -> None:
    if not spec.amplitudes_within_bounds():
        raise AmplitudeError(
            f'amplitudes scale={list(spec.scale_amplitudes)} bulge={spec.bulge_amplitude} '
            f'must lie in [0, {MAX_AMPLITUDE}]'
        )


def deform(base: Mesh, spec: ShapeCycleSpec, t: int, seed: int) -> Mesh:
    check_amplitudes(spec)
    phi = frame_phase(t, spec.frames)
    x = base.vertices
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    direction = np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)
    coefficients = np.zeros(spec.bulge_degree + 1)
    coefficients[-1] = 1.0
    harmonic = legendre.legval(direction[:, spec.bulge_axis.index], coefficients)
    radial = 1.0 + spec.bulge_amplitude * np.sin(phi + spec.bulge_phase) * harmonic
    scale = 1.0 + np.asarray(spec.scale_amplitudes) * np.sin(phi)
    vertices = x * scale * radial[:, None]
    if spec.noise_mm > 0:
        rng = np.random.default_rng([seed, t % spec.frames])
        vertices = vertices + rng.normal(0.0, spec.noise_mm, size=vertices.shape)
    return base.with_vertices(vertices)


def generate_cycle(spec: ShapeCycleSpec, seed: int, base: Mesh | None = None) -> list[Mesh]:
    """The T frames of one cycle, deterministic in (spec, seed)."""
    check_amplitudes(spec)
    base = base_mesh(spec) if base is None else base
    frames = [deform(base, spec, t, seed) for t in range(spec.frames)]
    logger.debug('cycle generated frames=%d vertices=%d', len(frames), base.vertex_count)
    return frames


def extreme_frames(frames: int) -> tuple[int, int]:
    """(largest-scale, smallest-scale) frame indices of a T-frame cycle."""
    phases = np.sin([frame_phase(t, frames) for t in range(frames)])
    return int(np.argmax(phases)), int(np.argmin(phases))
