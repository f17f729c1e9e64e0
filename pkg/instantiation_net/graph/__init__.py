from instantiation_net.graph.mesh import Mesh
from instantiation_net.graph.spectral import (
    ChebConvLayer,
    LaplacianBundle,
    build_laplacian,
    cheb_conv,
    eigendecompose,
    spectral_filter_exact,
)

__all__ = [
    'ChebConvLayer', 'LaplacianBundle', 'Mesh', 'build_laplacian', 'cheb_conv',
    'eigendecompose', 'spectral_filter_exact',
]
