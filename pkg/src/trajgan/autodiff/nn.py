"""Neural building blocks on top of the tape: linear layers, LSTM cells and
multi-head self-attention.

LSTM gate blocks are stacked in the order (input, forget, cell, output)
along the 4H axis of every weight and bias.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ContractError, DimensionError
from . import ops
from .ops import _sigmoid
from .tensor import Tensor, as_tensor, record

GATE_ORDER = ("input", "forget", "cell", "output")


class Module:
    """Container whose Tensor attributes are parameters, walked in definition order."""

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for key, value in vars(self).items():
            if isinstance(value, Tensor):
                out[prefix + key] = value
            elif isinstance(value, Module):
                out.update(value.named_parameters(f"{prefix}{key}/"))
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def zero_(self):
        for p in self.parameters():
            p.data[...] = 0.0
        return self

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def requires_grad_(self, flag: bool = True):
        for p in self.parameters():
            p.requires_grad = flag
        return self

    def load_arrays(self, arrays: dict[str, np.ndarray], prefix: str = ""):
        for name, p in self.named_parameters(prefix).items():
            if name not in arrays:
                raise ContractError(f"missing parameter {name!r}")
            value = arrays[name]
            if value.shape != p.shape:
                raise DimensionError(f"{name}: stored shape {value.shape} != {p.shape}")
            p.data[...] = value


def _param(data, name=None) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator,
                 bias: bool = True):
        bound = 1.0 / math.sqrt(in_features)
        self.weight = _param(rng.uniform(-bound, bound, (out_features, in_features)))
        self.bias = _param(rng.uniform(-bound, bound, out_features)) if bias else None

    def __call__(self, x) -> Tensor:
        return ops.linear(x, self.weight, self.bias)


@dataclass(eq=False)
class LstmCellParams(Module):
    input_weights: Tensor      # [4H, D]
    recurrent_weights: Tensor  # [4H, H]
    bias: Tensor               # [4H]
    hidden_size: int

    @classmethod
    def init(cls, input_size: int, hidden_size: int, rng: np.random.Generator,
             forget_bias: float = 1.0) -> "LstmCellParams":
        """Uniform(-1/sqrt(H), 1/sqrt(H)) weights, forget-gate bias set to ``forget_bias``."""
        bound = 1.0 / math.sqrt(hidden_size)
        h4 = 4 * hidden_size
        w_ih = rng.uniform(-bound, bound, (h4, input_size))
        w_hh = rng.uniform(-bound, bound, (h4, hidden_size))
        b = rng.uniform(-bound, bound, h4)
        b[hidden_size:2 * hidden_size] = forget_bias
        return cls(_param(w_ih), _param(w_hh), _param(b), hidden_size)

    @property
    def input_size(self) -> int:
        return self.input_weights.shape[1]


def _gates(pre: np.ndarray, hidden: int):
    i = _sigmoid(pre[..., :hidden])
    f = _sigmoid(pre[..., hidden:2 * hidden])
    g = np.tanh(pre[..., 2 * hidden:3 * hidden])
    o = _sigmoid(pre[..., 3 * hidden:])
    return i, f, g, o


def lstm_state_step(params: LstmCellParams, x, state) -> Tensor:
    """One LSTM step on a packed state ``[..., 2H] = h ++ c``; returns the new packed state."""
    hs = params.hidden_size
    x, state = as_tensor(x), as_tensor(state)
    w_ih, w_hh, b = params.input_weights, params.recurrent_weights, params.bias
    if x.shape[-1] != w_ih.shape[1] or state.shape[-1] != 2 * hs or \
            x.shape[:-1] != state.shape[:-1]:
        raise DimensionError(f"lstm: x {x.shape}, state {state.shape}, "
                             f"expected D={w_ih.shape[1]}, H={hs}")
    xd, sd = x.data, state.data
    h, c = sd[..., :hs], sd[..., hs:]
    pre = xd @ w_ih.data.T + h @ w_hh.data.T + b.data
    i, f, g, o = _gates(pre, hs)
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    out = np.concatenate([h_new, c_new], axis=-1)

    def backward(grad):
        gh, gc = grad[..., :hs], grad[..., hs:]
        dc = gc + gh * o * (1.0 - tc * tc)
        dpre = np.concatenate([
            dc * g * i * (1.0 - i),
            dc * c * f * (1.0 - f),
            dc * i * (1.0 - g * g),
            gh * tc * o * (1.0 - o),
        ], axis=-1)
        d2 = dpre.reshape(-1, 4 * hs)
        gx = dpre @ w_ih.data if x.requires_grad else None
        gstate = None
        if state.requires_grad:
            gstate = np.concatenate([dpre @ w_hh.data, dc * f], axis=-1)
        gw_ih = d2.T @ xd.reshape(-1, xd.shape[-1]) if w_ih.requires_grad else None
        gw_hh = d2.T @ h.reshape(-1, hs) if w_hh.requires_grad else None
        gb = d2.sum(axis=0) if b.requires_grad else None
        return gx, gstate, gw_ih, gw_hh, gb

    return record("lstm_step", (x, state, w_ih, w_hh, b), out, backward)


def lstm_step(params: LstmCellParams, x, h, c) -> tuple[Tensor, Tensor]:
    """Standard LSTM cell update; returns ``(h', c')``."""
    hs = params.hidden_size
    h, c = as_tensor(h), as_tensor(c)
    if h.shape[-1] != hs or c.shape[-1] != hs:
        raise DimensionError(f"lstm: h {h.shape}, c {c.shape}, expected H={hs}")
    state = lstm_state_step(params, x, ops.concat([h, c], axis=-1))
    return state[..., :hs], state[..., hs:]


def lstm_sequence(params: LstmCellParams, xs) -> Tensor:
    """Run the cell over ``xs [B, T, D]`` from a zero state; returns hidden states [B, T, H].

    The whole unroll is a single tape node with a hand-written BPTT backward.
    """
    hs = params.hidden_size
    xs = as_tensor(xs)
    w_ih, w_hh, b = params.input_weights, params.recurrent_weights, params.bias
    if xs.ndim != 3 or xs.shape[2] != w_ih.shape[1]:
        raise DimensionError(f"lstm_sequence: input {xs.shape}, expected [B, T, {w_ih.shape[1]}]")
    bsz, steps, _ = xs.shape
    if steps == 0:
        raise ContractError("lstm_sequence: empty sequence")
    xd = xs.data
    whh = w_hh.data
    xpre = xd @ w_ih.data.T + b.data
    hseq = np.empty((bsz, steps, hs))
    cseq = np.empty((bsz, steps, hs))
    gates = np.empty((bsz, steps, 4 * hs))
    h = np.zeros((bsz, hs))
    c = np.zeros((bsz, hs))
    for t in range(steps):
        pre = xpre[:, t] + h @ whh.T
        i, f, g, o = _gates(pre, hs)
        c = f * c + i * g
        h = o * np.tanh(c)
        gates[:, t, :hs] = i
        gates[:, t, hs:2 * hs] = f
        gates[:, t, 2 * hs:3 * hs] = g
        gates[:, t, 3 * hs:] = o
        hseq[:, t] = h
        cseq[:, t] = c

    def backward(grad):
        dpre_all = np.empty_like(gates)
        dh_next = np.zeros((bsz, hs))
        dc_next = np.zeros((bsz, hs))
        gw_hh = np.zeros_like(whh)
        for t in range(steps - 1, -1, -1):
            i = gates[:, t, :hs]
            f = gates[:, t, hs:2 * hs]
            g = gates[:, t, 2 * hs:3 * hs]
            o = gates[:, t, 3 * hs:]
            ct = cseq[:, t]
            c_prev = cseq[:, t - 1] if t > 0 else np.zeros((bsz, hs))
            tc = np.tanh(ct)
            gh = grad[:, t] + dh_next
            dc = dc_next + gh * o * (1.0 - tc * tc)
            dpre = dpre_all[:, t]
            dpre[:, :hs] = dc * g * i * (1.0 - i)
            dpre[:, hs:2 * hs] = dc * c_prev * f * (1.0 - f)
            dpre[:, 2 * hs:3 * hs] = dc * i * (1.0 - g * g)
            dpre[:, 3 * hs:] = gh * tc * o * (1.0 - o)
            if t > 0:
                gw_hh += dpre.T @ hseq[:, t - 1]
            dh_next = dpre @ whh
            dc_next = dc * f
        d2 = dpre_all.reshape(-1, 4 * hs)
        gx = dpre_all @ w_ih.data if xs.requires_grad else None
        gw_ih = d2.T @ xd.reshape(-1, xd.shape[2]) if w_ih.requires_grad else None
        gb = d2.sum(axis=0) if b.requires_grad else None
        return gx, gw_ih, (gw_hh if w_hh.requires_grad else None), gb

    return record("lstm_sequence", (xs, w_ih, w_hh, b), hseq, backward)


class MultiHeadSelfAttention(Module):
    """Scaled dot-product self-attention with output projection and residual.

    The key projection carries no bias: softmax is shift-invariant per row, so
    a key bias would receive an identically zero gradient.
    """

    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        if dim % heads:
            raise ContractError(f"model dim {dim} not divisible by {heads} heads")
        self.heads = heads
        self.query = Linear(dim, dim, rng)
        self.key = Linear(dim, dim, rng, bias=False)
        self.value = Linear(dim, dim, rng)
        self.out = Linear(dim, dim, rng)

    @property
    def dim(self) -> int:
        return self.query.weight.shape[0]

    def __call__(self, hidden, groups=None) -> tuple[Tensor, np.ndarray]:
        """Attend over the rows of ``hidden [N, dim]``.

        ``groups`` (length-N ints) restricts attention to rows sharing a group id,
        so several scenes can be packed into one call. Returns the context rows and
        the attention weights [heads, N, N].
        """
        hidden = as_tensor(hidden)
        if hidden.ndim != 2 or hidden.shape[1] != self.dim:
            raise DimensionError(f"mhsa: hidden {hidden.shape}, expected [N, {self.dim}]")
        n = hidden.shape[0]
        if n < 1:
            raise ContractError("mhsa: needs at least one row")
        dh = self.dim // self.heads

        def split(t):
            return ops.transpose(ops.reshape(t, (n, self.heads, dh)), (1, 0, 2))

        q = split(self.query(hidden))
        k = split(self.key(hidden))
        v = split(self.value(hidden))
        scores = ops.mul(ops.matmul(q, ops.transpose(k, (0, 2, 1))), 1.0 / math.sqrt(dh))
        mask = None
        if groups is not None:
            groups = np.asarray(groups)
            mask = groups[:, None] == groups[None, :]
        weights = ops.softmax(scores, axis=-1, mask=mask)
        ctx = ops.reshape(ops.transpose(ops.matmul(weights, v), (1, 0, 2)), (n, self.dim))
        return ops.add(self.out(ctx), hidden), weights.data
