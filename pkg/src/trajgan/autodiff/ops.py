"""Differentiable primitives.

All ops take Tensors (or anything ``np.asarray`` accepts, treated as
constants) and return a Tensor recorded on the active tape. Backward
closures return one gradient per input, ``None`` where not needed.
"""
from __future__ import annotations

import numpy as np

from ..errors import ContractError, DimensionError
from .tensor import Tensor, as_tensor, record

BCE_EPS = 1e-12


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _broadcast_check(kind, a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{kind}: cannot broadcast {a.shape} with {b.shape}") from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("add", a, b)
    sa, sb = a.shape, b.shape
    return record("add", (a, b), a.data + b.data,
                  lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("sub", a, b)
    sa, sb = a.shape, b.shape
    return record("sub", (a, b), a.data - b.data,
                  lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("mul", a, b)
    ad, bd = a.data, b.data
    return record("mul", (a, b), ad * bd,
                  lambda g: (_unbroadcast(g * bd, ad.shape) if a.requires_grad else None,
                             _unbroadcast(g * ad, bd.shape) if b.requires_grad else None))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("div", a, b)
    ad, bd = a.data, b.data
    out = ad / bd
    return record("div", (a, b), out,
                  lambda g: (_unbroadcast(g / bd, ad.shape) if a.requires_grad else None,
                             _unbroadcast(-g * out / bd, bd.shape) if b.requires_grad else None))


def neg(a) -> Tensor:
    a = as_tensor(a)
    return record("neg", (a,), -a.data, lambda g: (-g,))


def matmul(a, b) -> Tensor:
    """Matrix product for 2-D operands, batched over leading axes otherwise."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def backward(g):
        ga = _unbroadcast(g @ np.swapaxes(bd, -1, -2), ad.shape) if a.requires_grad else None
        gb = _unbroadcast(np.swapaxes(ad, -1, -2) @ g, bd.shape) if b.requires_grad else None
        return ga, gb

    return record("matmul", (a, b), ad @ bd, backward)


def linear(x, weight, bias=None) -> Tensor:
    """``x @ weight.T + bias`` with weight stored as [out, in]."""
    x, weight = as_tensor(x), as_tensor(weight)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[1]:
        raise DimensionError(f"linear: input {x.shape} vs weight {weight.shape}")
    xd, wd = x.data, weight.data
    out = xd @ wd.T
    inputs = (x, weight)
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (wd.shape[0],):
            raise DimensionError(f"linear: bias {bias.shape} vs weight {weight.shape}")
        out = out + bias.data
        inputs = (x, weight, bias)

    def backward(g):
        g2 = g.reshape(-1, g.shape[-1])
        gx = g @ wd if x.requires_grad else None
        gw = g2.T @ xd.reshape(-1, xd.shape[-1]) if weight.requires_grad else None
        if bias is None:
            return gx, gw
        return gx, gw, (g2.sum(axis=0) if bias.requires_grad else None)

    return record("linear", inputs, out, backward)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return record("tanh", (a,), out, lambda g: (g * (1.0 - out * out),))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return record("sigmoid", (a,), out, lambda g: (g * out * (1.0 - out),))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return record("exp", (a,), out, lambda g: (g * out,))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return record("sqrt", (a,), out, lambda g: (g * 0.5 / out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(ad)
    return record("log", (a,), out, lambda g: (g / ad,))


def square(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return record("square", (a,), ad * ad, lambda g: (2.0 * g * ad,))


def squared_error(a, b) -> Tensor:
    """Elementwise ``(a - b) ** 2``."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"squared_error: {a.shape} vs {b.shape}")
    diff = a.data - b.data
    return record("squared_error", (a, b), diff * diff,
                  lambda g: (2.0 * g * diff, -2.0 * g * diff))


def softmax(a, axis: int = -1, mask=None) -> Tensor:
    """Softmax along ``axis``. ``mask`` (bool, broadcastable) marks allowed entries;
    excluded entries get probability exactly zero. Every slice needs one allowed entry."""
    a = as_tensor(a)
    x = a.data
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        if not mask.any(axis=axis).all():
            raise ContractError("softmax: a slice has no unmasked entries")
        x = np.where(mask, x, -np.inf)
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return record("softmax", (a,), out, backward)


def concat(tensors, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ContractError("concat: empty input list")
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError as exc:
        raise DimensionError(f"concat: {exc}") from None
    sizes = np.cumsum([t.shape[axis] for t in ts])[:-1]

    def backward(g):
        return tuple(np.split(g, sizes, axis=axis))

    return record("concat", ts, out, backward)


def stack(tensors, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ContractError("stack: empty input list")
    try:
        out = np.stack([t.data for t in ts], axis=axis)
    except ValueError as exc:
        raise DimensionError(f"stack: {exc}") from None
    n = len(ts)

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(n))

    return record("stack", ts, out, backward)


def getitem(a, index) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    try:
        out = a.data[index]
    except IndexError as exc:
        raise DimensionError(f"slice: {exc}") from None
    out = np.array(out, dtype=np.float64, copy=True)

    basic = _is_basic_index(index)

    def backward(g):
        full = np.zeros(shape)
        if basic:
            full[index] = g
        else:
            np.add.at(full, index, g)
        return (full,)

    return record("slice", (a,), out, backward)


def _is_basic_index(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (int, np.integer, slice)) or i is Ellipsis or i is None
               for i in items)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    try:
        out = a.data.reshape(shape)
    except ValueError as exc:
        raise DimensionError(f"reshape: {exc}") from None
    return record("reshape", (a,), out, lambda g: (g.reshape(old),))


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    out = np.transpose(a.data, axes)
    inv = None if axes is None else np.argsort(axes)
    return record("transpose", (a,), out, lambda g: (np.transpose(g, inv),))


def _expand(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(np.reshape(g, (1,) * len(shape)), shape)
    if not keepdims:
        axes = (axis,) if isinstance(axis, int) else axis
        g = np.expand_dims(g, tuple(ax % len(shape) for ax in axes))
    return np.broadcast_to(g, shape)


def sum(a, axis=None, keepdims=False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    shape = a.shape
    out = np.asarray(a.data.sum(axis=axis, keepdims=keepdims), dtype=np.float64)
    return record("sum", (a,), out, lambda g: (_expand(g, shape, axis, keepdims),))


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    out = np.asarray(a.data.mean(axis=axis, keepdims=keepdims), dtype=np.float64)
    count = a.size // max(out.size, 1) if a.size else 1
    return record("mean", (a,), out, lambda g: (_expand(g, shape, axis, keepdims) / count,))


def cumsum(a, axis: int = 0) -> Tensor:
    a = as_tensor(a)
    out = np.cumsum(a.data, axis=axis)

    def backward(g):
        return (np.flip(np.cumsum(np.flip(g, axis=axis), axis=axis), axis=axis),)

    return record("cumsum", (a,), out, backward)


def bce(prob, target) -> Tensor:
    """Elementwise binary cross-entropy of probabilities against 0/1 targets.

    Terms with a zero coefficient are skipped, so ``bce(1, 1) == bce(0, 0) == 0``
    exactly. Probabilities are clamped to [1e-12, 1 - 1e-12] inside the logs.
    """
    prob = as_tensor(prob)
    t = np.broadcast_to(np.asarray(target, dtype=np.float64), prob.shape)
    p = prob.data
    if np.any((p < 0.0) | (p > 1.0)):
        raise ContractError("bce: probabilities must lie in [0, 1]")
    pos = np.clip(p, BCE_EPS, 1.0)
    negp = np.clip(1.0 - p, BCE_EPS, 1.0)
    out = np.zeros_like(p)
    on = t != 0.0
    off = t != 1.0
    out[on] -= t[on] * np.log(pos[on])
    out[off] -= (1.0 - t[off]) * np.log(negp[off])

    def backward(g):
        gp = np.zeros_like(p)
        gp[on] -= t[on] / pos[on]
        gp[off] += (1.0 - t[off]) / negp[off]
        return (g * gp,)

    return record("bce", (prob,), out, backward)


OPS = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "div": div,
    "neg": neg,
    "matmul": matmul,
    "linear": linear,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "exp": exp,
    "sqrt": sqrt,
    "log": log,
    "square": square,
    "squared_error": squared_error,
    "softmax": softmax,
    "concat": concat,
    "stack": stack,
    "slice": getitem,
    "reshape": reshape,
    "transpose": transpose,
    "sum": sum,
    "mean": mean,
    "cumsum": cumsum,
    "bce": bce,
}


def forward_op(kind: str, inputs, **attrs) -> Tensor:
    """Dispatch by op name; list-taking ops (concat, stack) get the whole list."""
    try:
        fn = OPS[kind]
    except KeyError:
        raise ContractError(f"unknown op kind {kind!r}") from None
    if kind in ("concat", "stack"):
        return fn(list(inputs), **attrs)
    return fn(*inputs, **attrs)
