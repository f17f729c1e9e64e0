"""Dense float64 tensors with reverse-mode differentiation.

Each tensor created by an operation remembers its parents and a backward rule
mapping the output gradient to one gradient per parent. Tensors are numbered in
creation order, so the reachable tensors sorted by that number form the
computation tape and replaying it backwards visits every node after its consumers.
"""
import itertools
import logging
from typing import Callable, Sequence

import numpy as np

from instantiation_net.exceptions import DimensionError, GradientError, NumericalError

logger = logging.getLogger(__name__)

_sequence = itertools.count()

BackwardRule = Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tensor:
    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data: np.ndarray = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name
        self._parents: tuple['Tensor', ...] = ()
        self._backward: BackwardRule | None = None
        self._seq = next(_sequence)
        self._replayed = False

    @classmethod
    def from_op(cls, data: np.ndarray, parents: Sequence['Tensor'], backward: BackwardRule,
                op: str) -> 'Tensor':
        """Wrap an operation result, recording it on the tape when any parent needs grad."""
        data = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(data)):
            raise NumericalError(f'{op} produced non-finite values')
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = None
        out._seq = next(_sequence)
        out._replayed = False
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f'item() needs a single element, tensor has shape {self.shape}')
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> 'Tensor':
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        req = ', requires_grad=True' if self.requires_grad else ''
        nm = f', name={self.name}' if self.name else ''
        return f'Tensor(shape={self.shape}{req}{nm})'

    # operator sugar, defined in ops
    def __add__(self, other):
        from instantiation_net.autodiff import ops
        return ops.add(self, ops.as_tensor(other))

    __radd__ = __add__

    def __sub__(self, other):
        from instantiation_net.autodiff import ops
        return ops.sub(self, ops.as_tensor(other))

    def __rsub__(self, other):
        from instantiation_net.autodiff import ops
        return ops.sub(ops.as_tensor(other), self)

    def __neg__(self):
        from instantiation_net.autodiff import ops
        return ops.neg(self)

    def __mul__(self, other):
        from instantiation_net.autodiff import ops
        return ops.mul(self, ops.as_tensor(other))

    __rmul__ = __mul__

    def __matmul__(self, other):
        from instantiation_net.autodiff import ops
        return ops.matmul(self, other)

    def __pow__(self, exponent: int):
        from instantiation_net.autodiff import ops
        return ops.power(self, exponent)

    def sum(self):
        from instantiation_net.autodiff import ops
        return ops.sum(self)

    def mean(self):
        from instantiation_net.autodiff import ops
        return ops.mean(self)

    def reshape(self, *shape):
        from instantiation_net.autodiff import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)


class ComputationTape:
    """Ordered record of the tensors a loss depends on."""

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def record(cls, output: Tensor) -> 'ComputationTape':
        seen: dict[int, Tensor] = {}
        stack = [output]
        while stack:
            node = stack.pop()
            if id(node) in seen or not node.requires_grad:
                continue
            seen[id(node)] = node
            stack.extend(node._parents)
        return cls(sorted(seen.values(), key=lambda t: t._seq))

    def __len__(self) -> int:
        return len(self.nodes)

    def replay(self, output: Tensor) -> None:
        grads: dict[int, np.ndarray] = {id(output): np.ones_like(output.data)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.is_leaf:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            parent_grads = node._backward(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                if pg.shape != parent.shape:
                    raise GradientError(
                        f'backward rule produced gradient of shape {pg.shape} for input {parent.shape}'
                    )
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg


def backward(loss: Tensor) -> ComputationTape:
    """Fill `grad` on every leaf tensor requiring grad that `loss` depends on."""
    if loss.data.size != 1:
        raise GradientError(f'backward needs a scalar loss, got shape {loss.shape}')
    if not loss.requires_grad:
        raise GradientError('loss is detached: nothing on the tape requires grad')
    if loss._replayed:
        raise GradientError('backward was already run for this loss; rebuild the graph first')
    tape = ComputationTape.record(loss)
    tape.replay(loss)
    loss._replayed = True
    logger.debug('backward replayed nodes=%d', len(tape))
    return tape
