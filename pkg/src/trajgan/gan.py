"""Conditional trajectory GAN: goal- and socially-conditioned LSTM decoder, LSTM
discriminator over full displacement sequences, and the training objectives."""
from __future__ import annotations

import numpy as np

from .autodiff import Linear, LstmCellParams, Module, Tensor, as_tensor, lstm_state_step, ops
from .autodiff.nn import lstm_sequence
from .config import ExperimentConfig, LossWeights, ModelConfig
from .errors import ContractError, DimensionError
from .features import Batch
from .social import SocialEncoder


class Generator(Module):
    """Decoder initial state = tanh(fuser([pooled goal embedding, social context, z])).

    Each step embeds the previous displacement (the last observed one at step 0),
    advances the LSTM and emits the next displacement.
    """

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.config = config
        self.social = SocialEncoder(config, rng)
        self.goal_embed = Linear(2, config.embed_dim, rng)
        self.fuser = Linear(config.embed_dim + config.hidden_dim + config.noise_dim, config.hidden_dim, rng)
        self.step_embed = Linear(2, config.embed_dim, rng)
        self.decoder_cell = LstmCellParams.init(config.embed_dim, config.hidden_dim, rng)
        self.output_head = Linear(config.hidden_dim, 2, rng)

    def condition(self, batch: Batch) -> tuple[Tensor, Tensor]:
        rows, _ = self.social(batch.agent_deltas, batch.groups)
        c_so = rows[batch.agent_rows]
        goals = ops.tanh(self.goal_embed(batch.targets / self.config.point_scale))
        c_ph = ops.mean(goals, axis=1)
        return c_ph, c_so

    def __call__(self, batch: Batch, z, t_pred: int) -> Tensor:
        """Predicted future positions [B, t_pred, 2] in each scene's local frame."""
        if t_pred < 1:
            raise ContractError("generate: t_pred must be >= 1")
        z = as_tensor(z)
        if z.shape != (batch.size, self.config.noise_dim):
            raise DimensionError(f"generate: z {z.shape}, expected {(batch.size, self.config.noise_dim)}")
        c_ph, c_so = self.condition(batch)
        h0 = ops.tanh(self.fuser(ops.concat([c_ph, c_so, z], axis=1)))
        state = ops.concat([h0, Tensor(np.zeros_like(h0.data))], axis=1)
        hs = self.config.hidden_dim
        delta = as_tensor(batch.obs_deltas[:, -1, :])
        outs = []
        for _ in range(t_pred):
            state = lstm_state_step(self.decoder_cell, ops.tanh(self.step_embed(delta)), state)
            delta = self.output_head(state[:, :hs])
            outs.append(delta)
        return ops.cumsum(ops.stack(outs, axis=1), axis=1)


class Discriminator(Module):
    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.embed = Linear(2, config.embed_dim, rng)
        self.cls_cell = LstmCellParams.init(config.embed_dim, config.hidden_dim, rng)
        self.head = Linear(config.hidden_dim, 1, rng)

    def __call__(self, deltas) -> Tensor:
        """[B, T, 2] displacements -> realness score [B] in (0, 1)."""
        hs = lstm_sequence(self.cls_cell, ops.tanh(self.embed(deltas)))
        return ops.sigmoid(self.head(hs[:, -1, :]))[:, 0]


class TrajGAN(Module):
    def __init__(self, config: ModelConfig = ModelConfig(), rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.gen = Generator(config, rng)
        self.dis = Discriminator(config, rng)

    @property
    def config(self) -> ModelConfig:
        return self.gen.config

    @classmethod
    def from_experiment(cls, cfg: ExperimentConfig) -> "TrajGAN":
        return cls(cfg.model, np.random.default_rng([cfg.seeds.train, 1]))


# ---------------------------------------------------------------- functional surface


def generate(gen: Generator, batch: Batch, z, t_pred: int) -> Tensor:
    return gen(batch, z, t_pred)


def full_deltas(obs_deltas, future) -> Tensor:
    """Observed displacements followed by the displacements of a future that starts at
    the local origin (the last observed position)."""
    future = as_tensor(future)
    first = future[:, :1, :]
    rest = ops.sub(future[:, 1:, :], future[:, :-1, :])
    return ops.concat([as_tensor(obs_deltas), first, rest], axis=1)


def discriminate(dis: Discriminator, full_traj, expected_len: int | None = None) -> Tensor:
    """Score absolute trajectories [T, 2] or [B, T, 2]; returns a scalar or [B] tensor."""
    traj = as_tensor(full_traj)
    single = traj.ndim == 2
    if single:
        traj = ops.reshape(traj, (1,) + traj.shape)
    if traj.ndim != 3 or traj.shape[2] != 2 or traj.shape[1] < 2:
        raise DimensionError(f"discriminate: trajectory shape {traj.shape}")
    if expected_len is not None and traj.shape[1] != expected_len:
        raise DimensionError(f"discriminate: sequence length {traj.shape[1]} != {expected_len}")
    deltas = ops.sub(traj[:, 1:, :], traj[:, :-1, :])
    score = dis(deltas)
    return score[0] if single else score


def _check_pair(pred: Tensor, truth: Tensor):
    if pred.shape != truth.shape:
        raise DimensionError(f"prediction {pred.shape} vs ground truth {truth.shape}")


def regression_terms(pred, truth) -> tuple[Tensor, Tensor]:
    """Squared-L2 trajectory and endpoint terms, averaged over the batch."""
    pred, truth = as_tensor(pred), as_tensor(truth)
    _check_pair(pred, truth)
    sq = ops.sum(ops.squared_error(pred, truth), axis=-1)  # [..., T]
    return ops.mean(sq), ops.mean(sq[..., -1])


def generator_loss(weights: LossWeights, d_fake, pred, truth) -> Tensor:
    pred, truth = as_tensor(pred), as_tensor(truth)
    _check_pair(pred, truth)
    d_fake = as_tensor(d_fake)
    l2_traj, l2_final = regression_terms(pred, truth)
    adv = ops.mean(ops.bce(d_fake, np.ones(d_fake.shape)))
    return ops.add(ops.add(ops.mul(adv, weights.gan), ops.mul(l2_traj, weights.ade)),
                   ops.mul(l2_final, weights.fde))


def discriminator_loss(d_real, d_fake) -> Tensor:
    d_real, d_fake = as_tensor(d_real), as_tensor(d_fake)
    real = ops.mean(ops.bce(d_real, np.ones(d_real.shape)))
    fake = ops.mean(ops.bce(d_fake, np.zeros(d_fake.shape)))
    return ops.add(real, fake)


def sample_discriminator_input(pred, truth, obs, rng: np.random.Generator, force: bool | None = None):
    """Pick the real or the generated future (fair coin unless ``force`` is given) and
    prepend the observation. Works per sample for batched [B, T, 2] inputs.

    Returns (full trajectory, label) with label 1 for real and 0 for generated.
    """
    pred, truth, obs = as_tensor(pred), as_tensor(truth), as_tensor(obs)
    _check_pair(pred, truth)
    if pred.ndim == 2:
        real = bool(rng.random() < 0.5) if force is None else bool(force)
        chosen = truth if real else pred
        return ops.concat([obs, chosen], axis=0), float(real)
    b = pred.shape[0]
    real = rng.random(b) < 0.5 if force is None else np.full(b, bool(force))
    mask = real[:, None, None].astype(np.float64)
    chosen = ops.add(ops.mul(truth, mask), ops.mul(pred, 1.0 - mask))
    return ops.concat([obs, chosen], axis=1), real.astype(np.float64)


def bce_mean(prob, target) -> Tensor:
    return ops.mean(ops.bce(prob, target))


def zero_gan(config: ModelConfig = ModelConfig()) -> TrajGAN:
    return TrajGAN(config, np.random.default_rng(0)).zero_()


def noise(rng: np.random.Generator, batch: int, dim: int) -> np.ndarray:
    return rng.standard_normal((batch, dim))


__all__ = [
    "Discriminator", "Generator", "TrajGAN", "bce_mean", "discriminate", "discriminator_loss",
    "full_deltas", "generate", "generator_loss", "noise", "regression_terms",
    "sample_discriminator_input", "zero_gan",
]
