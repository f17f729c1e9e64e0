from instantiation_net.synthetic.cycle import base_mesh, deform, extreme_frames, generate_cycle
from instantiation_net.synthetic.render import render_projection
from instantiation_net.synthetic.shapes import icosphere, random_hull_mesh

__all__ = [
    'base_mesh', 'deform', 'extreme_frames', 'generate_cycle', 'icosphere', 'random_hull_mesh', 'render_projection',
]
