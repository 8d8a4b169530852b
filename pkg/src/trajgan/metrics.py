"""Displacement metrics and the constant-velocity baseline."""
from __future__ import annotations

import numpy as np

from .errors import ContractError, DimensionError
from .scene import Scene


def _pair(pred, truth):
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise DimensionError(f"prediction {pred.shape} vs ground truth {truth.shape}")
    if pred.ndim < 2 or pred.shape[-2] < 1 or pred.shape[-1] != 2:
        raise DimensionError(f"expected [..., T>=1, 2] trajectories, got {pred.shape}")
    return pred, truth


def displacement_errors(pred, truth) -> np.ndarray:
    """Per-frame Euclidean distances, shape [..., T]."""
    pred, truth = _pair(pred, truth)
    d = pred - truth
    return np.hypot(d[..., 0], d[..., 1])


def ade(pred, truth):
    e = displacement_errors(pred, truth).mean(axis=-1)
    return float(e) if e.ndim == 0 else e


def fde(pred, truth):
    e = displacement_errors(pred, truth)[..., -1]
    return float(e) if e.ndim == 0 else e


def constant_velocity_baseline(scene: Scene) -> np.ndarray:
    """Repeat the last observed AGENT displacement over the prediction window."""
    obs = scene.agent_observed()
    if len(obs) < 2:
        raise ContractError("constant-velocity baseline needs two observed frames")
    step = obs[-1] - obs[-2]
    k = np.arange(1, scene.t_pred + 1, dtype=np.float64)[:, None]
    return obs[-1] + k * step
