"""Central finite-difference checks of analytic gradients."""
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from instantiation_net.autodiff.tensor import Tensor, backward

DEFAULT_STEP = 1e-5
RELATIVE_FLOOR = 1e-7


@dataclass
class GradCheckReport:
    max_rel_error: float
    checked: int
    worst: str = ''

    def passed(self, tolerance: float) -> bool:
        return self.checked > 0 and self.max_rel_error < tolerance


def relative_error(analytic: float, numeric: float, floor: float = RELATIVE_FLOOR) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def numerical_derivative(fn: Callable[[], Tensor], tensor: Tensor, index: tuple[int, ...],
                         step: float = DEFAULT_STEP) -> float:
    original = tensor.data[index]
    tensor.data[index] = original + step
    plus = fn().item()
    tensor.data[index] = original - step
    minus = fn().item()
    tensor.data[index] = original
    return (plus - minus) / (2 * step)


def check_gradients(fn: Callable[[], Tensor], tensors: Mapping[str, Tensor], points: int,
                    rng: np.random.Generator, step: float = DEFAULT_STEP,
                    skip: Callable[[str, tuple[int, ...]], bool] | None = None) -> GradCheckReport:
    """Compare backward() against finite differences at `points` random coordinates per tensor.

    `fn` rebuilds the graph from the current tensor values and returns a scalar loss.
    `skip` may veto coordinates sitting on a non-differentiable tie.
    """
    for t in tensors.values():
        t.zero_grad()
    backward(fn())
    analytic = {name: (t.grad.copy() if t.grad is not None else np.zeros(t.shape)) for name, t in tensors.items()}

    report = GradCheckReport(max_rel_error=0.0, checked=0)
    for name, t in tensors.items():
        flat = rng.choice(t.size, size=min(points, t.size), replace=False)
        for position in flat:
            index = np.unravel_index(int(position), t.shape)
            if skip is not None and skip(name, index):
                continue
            numeric = numerical_derivative(fn, t, index, step)
            err = relative_error(float(analytic[name][index]), numeric)
            report.checked += 1
            if err > report.max_rel_error:
                report.max_rel_error = err
                report.worst = f'{name}{tuple(int(i) for i in index)}'
    return report
