"""Central finite-difference oracle for tape gradients."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tensor, backward, no_grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Norm-wise ``|a - n| / max(|a|, |n|)``; 0 when both vanish."""
    diff = float(np.linalg.norm(analytic - numeric))
    scale = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)))
    if scale < 1e-300:
        return 0.0
    return diff / scale


def numeric_gradient(fn: Callable[[], Tensor], param: Tensor, step: float = 1e-5) -> np.ndarray:
    flat = param.data.reshape(-1)
    out = np.zeros_like(flat)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = fn().item()
            flat[i] = orig - step
            down = fn().item()
            flat[i] = orig
            out[i] = (up - down) / (2.0 * step)
    return out.reshape(param.shape)


def check_gradients(fn: Callable[[], Tensor], params: dict[str, Tensor],
                    step: float = 1e-5) -> dict[str, float]:
    """Relative error between backward() and central differences, per parameter."""
    for p in params.values():
        p.grad = None
    loss = fn()
    backward(loss)
    analytic = {name: (np.zeros_like(p.data) if p.grad is None else p.grad.copy())
                for name, p in params.items()}
    for p in params.values():
        p.grad = None
    return {name: relative_error(analytic[name], numeric_gradient(fn, p, step))
            for name, p in params.items()}
