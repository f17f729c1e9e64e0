"""SGD with momentum and a step-decay learning rate."""
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from instantiation_net.autodiff.tensor import Tensor
from instantiation_net.exceptions import GradientError
from instantiation_net.schemes.config import TrainConfig


def learning_rate(config: TrainConfig, iteration: int, n_frames: int) -> float:
    """lr0 * decay ** (iteration // (decay_period_frames * n_frames))."""
    return config.lr0 * config.decay ** (iteration // config.decay_every(n_frames))


@dataclass
class SGDState:
    velocities: dict[str, np.ndarray] = field(default_factory=dict)
    iteration: int = 0


def sgd_step(params: Iterable[tuple[str, Tensor]], state: SGDState, config: TrainConfig, n_frames: int) -> float:
    """v <- momentum * v + grad; p <- p - lr * v. Returns the learning rate used."""
    params = list(params)
    for name, t in params:
        if t.grad is None:
            raise GradientError(f'parameter {name} has no gradient; run backward before stepping')
    lr = learning_rate(config, state.iteration, n_frames)
    for name, t in params:
        velocity = state.velocities.get(name)
        velocity = t.grad.copy() if velocity is None else config.momentum * velocity + t.grad
        state.velocities[name] = velocity
        t.data -= lr * velocity
    state.iteration += 1
    return lr
