"""Model checkpoints: generator under ``gen/``, discriminator under ``dis/`` and the
shape-defining settings under ``meta/``."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .autodiff import decode_checkpoint, encode_checkpoint
from .config import ModelConfig, WindowConfig
from .errors import CheckpointError
from .gan import TrajGAN

_MODEL_FIELDS = ("embed_dim", "hidden_dim", "heads", "noise_dim", "point_scale")


def model_arrays(model: TrajGAN, window: WindowConfig) -> dict[str, np.ndarray]:
    cfg = model.config
    arrays = {
        "meta/window": np.array([window.t_obs, window.t_pred, window.hz], dtype=np.float64),
        "meta/model": np.array([getattr(cfg, f) for f in _MODEL_FIELDS], dtype=np.float64),
    }
    arrays.update({k: p.data.copy() for k, p in model.gen.named_parameters("gen/").items()})
    arrays.update({k: p.data.copy() for k, p in model.dis.named_parameters("dis/").items()})
    return arrays


def model_bytes(model: TrajGAN, window: WindowConfig) -> bytes:
    return encode_checkpoint(model_arrays(model, window))


def model_from_arrays(arrays: dict[str, np.ndarray]) -> tuple[TrajGAN, WindowConfig]:
    try:
        w = arrays["meta/window"]
        m = arrays["meta/model"]
    except KeyError as exc:
        raise CheckpointError(f"checkpoint lacks {exc.args[0]!r}") from None
    if w.shape != (3,) or m.shape != (len(_MODEL_FIELDS),):
        raise CheckpointError("checkpoint metadata has unexpected shape")
    window = WindowConfig(int(w[0]), int(w[1]), float(w[2]))
    cfg = ModelConfig(int(m[0]), int(m[1]), int(m[2]), int(m[3]), float(m[4]))
    model = TrajGAN(cfg, np.random.default_rng(0))
    try:
        model.gen.load_arrays(arrays, "gen/")
        model.dis.load_arrays(arrays, "dis/")
    except Exception as exc:  # noqa: BLE001 - rewrap as a checkpoint problem
        raise CheckpointError(f"checkpoint does not match the model layout: {exc}") from None
    return model, window


def save_model(path, model: TrajGAN, window: WindowConfig) -> None:
    Path(path).write_bytes(model_bytes(model, window))


def load_model(path) -> tuple[TrajGAN, WindowConfig]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    return model_from_arrays(decode_checkpoint(path.read_bytes()))
