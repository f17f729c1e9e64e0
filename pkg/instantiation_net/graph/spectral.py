"""Graph Laplacians and Chebyshev spectral filtering on mesh vertex signals."""
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from numpy.polynomial import chebyshev

from instantiation_net.autodiff.init import glorot_uniform, zeros
from instantiation_net.autodiff.tensor import Tensor
from instantiation_net.exceptions import DimensionError, DisconnectedMeshError, MeshError, OracleSizeError
from instantiation_net.graph.mesh import Mesh

logger = logging.getLogger(__name__)

POWER_TOLERANCE = 1e-9
POWER_MAX_ITER = 10_000
DENSE_EIGEN_LIMIT = 1024
ORACLE_CAP = 200


@dataclass(frozen=True)
class LaplacianBundle:
    """L = D - A, its largest eigenvalue and the scaled L~ = 2L/lambda_max - I."""
    laplacian: scipy.sparse.csr_matrix
    lambda_max: float
    scaled: scipy.sparse.csr_matrix

    @property
    def vertex_count(self) -> int:
        return self.laplacian.shape[0]

    @classmethod
    def from_laplacian(cls, laplacian: scipy.sparse.spmatrix, lambda_max: float) -> 'LaplacianBundle':
        laplacian = scipy.sparse.csr_matrix(laplacian)
        laplacian.sort_indices()
        m = laplacian.shape[0]
        scaled = (laplacian * (2.0 / lambda_max) - scipy.sparse.identity(m, format='csr')).tocsr()
        scaled.sort_indices()
        return cls(laplacian=laplacian, lambda_max=float(lambda_max), scaled=scaled)


def laplacian_matrix(mesh: Mesh) -> scipy.sparse.csr_matrix:
    a = mesh.adjacency
    lap = (scipy.sparse.diags(mesh.degrees) - a).tocsr()
    lap.sort_indices()
    return lap


def power_iteration(laplacian: scipy.sparse.spmatrix, tol: float = POWER_TOLERANCE,
                    max_iter: int = POWER_MAX_ITER) -> tuple[float, np.ndarray]:
    """Rayleigh-quotient estimate of the largest eigenvalue and the final unit iterate.

    Stops once the quotient changes by less than `tol` relative and the
    residual ||Lx - lambda x|| is below sqrt(tol) * lambda.
    """
    m = laplacian.shape[0]
    x = np.random.default_rng(0).standard_normal(m)
    x /= np.linalg.norm(x)
    previous = 0.0
    lam = 0.0
    for iteration in range(1, max_iter + 1):
        y = laplacian @ x
        lam = float(x @ y)
        norm_y = float(np.linalg.norm(y))
        if norm_y == 0.0:
            return 0.0, x
        residual = float(np.linalg.norm(y - lam * x))
        if lam > 0 and abs(lam - previous) <= tol * lam and residual <= math.sqrt(tol) * lam:
            logger.debug('power iteration converged iterations=%d lambda_max=%.12g', iteration, lam)
            return lam, x
        previous = lam
        x = y / norm_y
    logger.warning('power iteration hit cap iterations=%d lambda_max=%.12g', max_iter, lam)
    return lam, x


def largest_eigenvalue(laplacian: scipy.sparse.spmatrix) -> float:
    """Largest eigenvalue of a symmetric positive semi-definite matrix, to machine precision.

    Up to DENSE_EIGEN_LIMIT rows a dense symmetric solver is used. Larger matrices are
    seeded by power iteration and finished by ARPACK Lanczos with tol=0.
    """
    m = laplacian.shape[0]
    if m <= DENSE_EIGEN_LIMIT:
        dense = laplacian.toarray() if scipy.sparse.issparse(laplacian) else np.asarray(laplacian)
        return float(scipy.linalg.eigvalsh(dense.astype(np.float64), subset_by_index=[m - 1, m - 1])[0])
    estimate, x = power_iteration(laplacian)
    if estimate <= 0.0:
        return estimate
    refined = scipy.sparse.linalg.eigsh(laplacian.astype(np.float64), k=1, which='LA', v0=x, tol=0,
                                        return_eigenvectors=False)
    logger.debug('lanczos refinement estimate=%.12g lambda_max=%.17g', estimate, refined[0])
    return float(refined[0])


def build_laplacian(mesh: Mesh) -> LaplacianBundle:
    if mesh.vertex_count < 2:
        raise MeshError(f'a Laplacian needs at least 2 vertices, mesh has {mesh.vertex_count}')
    if not mesh.is_connected():
        raise DisconnectedMeshError(f'mesh with {mesh.vertex_count} vertices is not connected')
    lap = laplacian_matrix(mesh)
    lambda_max = largest_eigenvalue(lap)
    if lambda_max <= 0:
        raise MeshError('Laplacian has no positive eigenvalue')
    return LaplacianBundle.from_laplacian(lap, lambda_max)


def eigendecompose(laplacian: scipy.sparse.spmatrix, cap: int = ORACLE_CAP) -> tuple[np.ndarray, np.ndarray]:
    """Dense eigendecomposition L = U diag(lambda) U^T, ascending eigenvalues."""
    m = laplacian.shape[0]
    if m > cap:
        raise OracleSizeError(
            f'dense eigendecomposition is capped at {cap} vertices (got {m}); use cheb_conv instead'
        )
    dense = laplacian.toarray() if scipy.sparse.issparse(laplacian) else np.asarray(laplacian)
    lam, u = np.linalg.eigh(dense)
    return u, lam


def chebyshev_filter_response(theta: np.ndarray, scaled_eigenvalues: np.ndarray) -> np.ndarray:
    """g_theta(x) = sum_k theta_k T_k(x) evaluated at each scaled eigenvalue."""
    return chebyshev.chebval(scaled_eigenvalues, np.asarray(theta, dtype=np.float64))


def spectral_filter_exact(bundle: LaplacianBundle, u: np.ndarray, lam: np.ndarray, v: np.ndarray,
                          theta: np.ndarray) -> np.ndarray:
    """Apply g_theta(L~) in the graph Fourier domain: U g(lambda~) U^T v."""
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    if theta.size < 1:
        raise DimensionError('spectral filter needs at least one coefficient')
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] != bundle.vertex_count:
        raise DimensionError(f'signal has {v.shape[0]} rows, Laplacian has {bundle.vertex_count}')
    response = chebyshev_filter_response(theta, 2.0 * lam / bundle.lambda_max - 1.0)
    spectrum = u.T @ v
    spectrum = response[:, None] * spectrum if spectrum.ndim == 2 else response * spectrum
    return u @ spectrum


@dataclass
class ChebConvLayer:
    """Chebyshev coefficients theta (Fin x Fout x K) and a per-output-channel bias."""
    theta: Tensor
    bias: Tensor

    @classmethod
    def create(cls, fin: int, fout: int, order: int, rng: np.random.Generator, name: str = 'cheb') -> 'ChebConvLayer':
        if order < 1:
            raise DimensionError(f'Chebyshev order must be at least 1, got {order}')
        theta = glorot_uniform((fin, fout, order), fin * order, fout * order, rng, name=f'{name}.theta')
        return cls(theta=theta, bias=zeros((fout,), name=f'{name}.bias'))

    @property
    def order(self) -> int:
        return self.theta.shape[2]

    @property
    def in_channels(self) -> int:
        return self.theta.shape[0]

    @property
    def out_channels(self) -> int:
        return self.theta.shape[1]

    def parameter_count(self) -> tuple[int, int]:
        """(filter parameters Fin*Fout*K, bias parameters Fout)."""
        return self.theta.size, self.bias.size


def chebyshev_basis(scaled: scipy.sparse.spmatrix, x: np.ndarray, order: int) -> list[np.ndarray]:
    """[T_0(L~)x, ..., T_{K-1}(L~)x] by the three-term recurrence on vectors."""
    basis = [x]
    if order > 1:
        basis.append(scaled @ x)
    for _ in range(2, order):
        basis.append(2.0 * (scaled @ basis[-1]) - basis[-2])
    return basis


def cheb_conv(layer: ChebConvLayer, bundle: LaplacianBundle, v: Tensor) -> Tensor:
    """y_j = sum_i g_theta_ij(L~) v_i + bias_j for an M x Fin signal."""
    if v.ndim != 2 or v.shape[0] != bundle.vertex_count:
        raise DimensionError(f'cheb_conv: signal {v.shape} does not live on a {bundle.vertex_count}-vertex mesh')
    if v.shape[1] != layer.in_channels:
        raise DimensionError(f'cheb_conv: signal has {v.shape[1]} channels, layer expects {layer.in_channels}')
    scaled = bundle.scaled
    theta = layer.theta.data
    order = layer.order
    basis = chebyshev_basis(scaled, v.data, order)
    out = layer.bias.data + sum(basis[k] @ theta[:, :, k] for k in range(order))

    def backward(g):
        g_theta = np.stack([basis[k].T @ g for k in range(order)], axis=-1)
        g_bias = g.sum(axis=0)
        g_basis = [g @ theta[:, :, k].T for k in range(order)]
        # L~ is symmetric, so its transpose is itself
        for k in range(order - 1, 1, -1):
            g_basis[k - 1] = g_basis[k - 1] + 2.0 * (scaled @ g_basis[k])
            g_basis[k - 2] = g_basis[k - 2] - g_basis[k]
        if order > 1:
            g_basis[0] = g_basis[0] + scaled @ g_basis[1]
        return g_basis[0], g_theta, g_bias

    return Tensor.from_op(out, (v, layer.theta, layer.bias), backward, 'cheb_conv')
