import numpy as np

from instantiation_net.autodiff.tensor import Tensor


def glorot_uniform(shape: tuple[int, ...], fan_in: int, fan_out: int, rng: np.random.Generator,
                   name: str | None = None) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=shape), requires_grad=True, name=name)


def conv_kernel(cin: int, k: int, cout: int, rng: np.random.Generator, name: str | None = None) -> Tensor:
    return glorot_uniform((cin, k, k, cout), cin * k * k, cout * k * k, rng, name)


def zeros(shape: tuple[int, ...], name: str | None = None) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True, name=name)


def ones(shape: tuple[int, ...], name: str | None = None) -> Tensor:
    return Tensor(np.ones(shape), requires_grad=True, name=name)
