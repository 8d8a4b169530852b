"""Dense float64 tensors with a define-by-run gradient tape.

Every differentiable op appends one node to the active tape. ``backward``
walks the tape in strictly decreasing append order starting from the loss
node, then consumes the tape. Tapes are per-thread.
"""
from __future__ import annotations

import threading
from contextlib import contextmanager
from typing import Callable, Sequence

import numpy as np

from ..errors import ContractError, DimensionError, NumericError


class Node:
    __slots__ = ("kind", "inputs", "output", "backward_fn", "index")

    def __init__(self, kind, inputs, output, backward_fn, index):
        self.kind = kind
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn
        self.index = index


class GradTape:
    """Append-only list of op nodes for one forward pass."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.enabled = True

    def __len__(self):
        return len(self.nodes)

    def append(self, kind, inputs, output, backward_fn) -> Node:
        node = Node(kind, inputs, output, backward_fn, len(self.nodes))
        self.nodes.append(node)
        return node

    def clear(self):
        for node in self.nodes:
            out = node.output
            out._node = None
            out.requires_grad = False
        self.nodes = []


_local = threading.local()


def current_tape() -> GradTape:
    tape = getattr(_local, "tape", None)
    if tape is None:
        tape = _local.tape = GradTape()
    return tape


def reset_tape():
    """Drop any recorded but never differentiated graph."""
    current_tape().clear()


@contextmanager
def no_grad():
    tape = current_tape()
    prev = tape.enabled
    tape.enabled = False
    try:
        yield
    finally:
        tape.enabled = prev


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_node", "name", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=np.float64)
        if arr is data and not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._node: Node | None = None
        self.name = name

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
    def tape_id(self) -> int | None:
        return None if self._node is None else self._node.index

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _not_scalar(self)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    # operator sugar; implementations live in ops.py
    def __add__(self, other):
        return _ops().add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return _ops().sub(self, other)

    def __rsub__(self, other):
        return _ops().sub(other, self)

    def __mul__(self, other):
        return _ops().mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return _ops().div(self, other)

    def __neg__(self):
        return _ops().neg(self)

    def __matmul__(self, other):
        return _ops().matmul(self, other)

    def __getitem__(self, index):
        return _ops().getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return _ops().sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return _ops().mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return _ops().reshape(self, shape)

    @property
    def T(self):
        return _ops().transpose(self)


def _not_scalar(t):
    raise ContractError(f"item() needs a single-element tensor, got shape {t.shape}")


def _ops():
    from . import ops

    return ops


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def record(kind: str, inputs: Sequence[Tensor], out: np.ndarray,
           backward_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]]) -> Tensor:
    """Wrap ``out`` in a Tensor and put it on the tape if any input needs grad."""
    if not np.isfinite(out).all():
        tape = current_tape()
        raise NumericError(f"op {kind!r} (tape position {len(tape)}) produced a non-finite value",
                           op=kind)
    result = Tensor.__new__(Tensor)
    result.data = out
    result.grad = None
    result.name = None
    result._node = None
    tape = current_tape()
    needs = tape.enabled and any(t.requires_grad for t in inputs)
    result.requires_grad = needs
    if needs:
        result._node = tape.append(kind, tuple(inputs), result, backward_fn)
    return result


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every requires_grad leaf reachable from ``loss``."""
    if loss.size != 1:
        raise ContractError(f"backward() needs a scalar loss, got shape {loss.shape}")
    tape = current_tape()
    if loss._node is None:
        if loss.requires_grad:
            _accumulate(loss, np.ones_like(loss.data))
        tape.clear()
        return
    nodes = tape.nodes
    start = loss._node.index
    if start >= len(nodes) or nodes[start] is not loss._node:
        raise ContractError("loss was not recorded on the active tape")
    grads: dict[int, np.ndarray] = {start: np.ones_like(loss.data)}
    for i in range(start, -1, -1):
        g = grads.pop(i, None)
        if g is None:
            continue
        node = nodes[i]
        in_grads = node.backward_fn(g)
        for inp, gi in zip(node.inputs, in_grads):
            if gi is None or not inp.requires_grad:
                continue
            src = inp._node
            if src is None:
                _accumulate(inp, gi)
            else:
                j = src.index
                prev = grads.get(j)
                grads[j] = gi if prev is None else prev + gi
    tape.clear()


def _accumulate(leaf: Tensor, g: np.ndarray):
    if g.shape != leaf.data.shape:
        raise DimensionError(f"gradient shape {g.shape} != parameter shape {leaf.data.shape}")
    if leaf.grad is None:
        leaf.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        leaf.grad += g
