"""Social context: per-agent motion encoding followed by self-attention across agents."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Linear, LstmCellParams, Module, MultiHeadSelfAttention, Tensor, ops
from .autodiff.nn import lstm_sequence
from .config import ExperimentConfig, ModelConfig
from .errors import ContractError
from .features import prepare_scene
from .preprocess import DisplacementTrack
from .scene import Scene


class SocialEncoder(Module):
    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.embed = Linear(2, config.embed_dim, rng)
        self.encoder_cell = LstmCellParams.init(config.embed_dim, config.hidden_dim, rng)
        self.mhsa = MultiHeadSelfAttention(config.hidden_dim, config.heads, rng)

    def encode(self, deltas) -> Tensor:
        """[N, T, 2] displacements -> final hidden state per agent [N, H]."""
        emb = ops.tanh(self.embed(deltas))
        hs = lstm_sequence(self.encoder_cell, emb)
        return hs[:, -1, :]

    def __call__(self, deltas, groups=None) -> tuple[Tensor, np.ndarray]:
        return self.mhsa(self.encode(deltas), groups)


@dataclass(frozen=True, eq=False)
class SocialContext:
    rows: Tensor          # [N, H]
    weights: np.ndarray   # [heads, N, N]
    target_row: int = 0

    @property
    def target_context(self) -> Tensor:
        return self.rows[self.target_row]


def _deltas_array(tracks) -> np.ndarray:
    if isinstance(tracks, np.ndarray):
        arr = tracks
    elif not tracks:
        raise ContractError("encode_motion: empty track list")
    else:
        arr = np.stack([t.deltas if isinstance(t, DisplacementTrack) else np.asarray(t) for t in tracks])
    if arr.ndim != 3 or arr.shape[0] == 0:
        raise ContractError("encode_motion: expected a non-empty [N, T, 2] set of tracks")
    return np.asarray(arr, dtype=np.float64)


def encode_motion(encoder: SocialEncoder, tracks) -> Tensor:
    return encoder.encode(_deltas_array(tracks))


def mhsa(encoder: SocialEncoder, hidden, groups=None) -> SocialContext:
    rows, weights = encoder.mhsa(hidden, groups)
    return SocialContext(rows, weights)


def social_forward(encoder: SocialEncoder, scene: Scene, rng: np.random.Generator | None = None,
                   config: ExperimentConfig = ExperimentConfig()) -> SocialContext:
    # the target points drawn inside prepare_scene are not used here
    feats = prepare_scene(scene, rng or np.random.default_rng(0), config)
    return mhsa(encoder, encode_motion(encoder, feats.agent_deltas))
