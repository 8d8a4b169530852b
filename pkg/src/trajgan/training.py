"""Adversarial training loop with plateau learning-rate decay and best-model retention."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Adam, backward, no_grad
from .config import ExperimentConfig
from .errors import ConfigError, ContractError
from .evaluation import eval_inputs, label_scene, predict_local
from .features import collate, prepare_scene
from .gan import TrajGAN, bce_mean, discriminator_loss, full_deltas, generator_loss
from .metrics import ade, fde
from .persistence import model_arrays, model_from_arrays
from .preprocess import CURVE, STRAIGHT, BalancedSampler, augment
from .scene import Scene
from .target_points import crop_drivable

log = logging.getLogger("trajgan.train")

LOG_HEADER = ("iteration", "g_loss", "d_loss", "lr", "val_ade", "val_fde")


class PlateauScheduler:
    """Multiply the learning rate by ``factor`` whenever ``window`` iterations pass
    without the smoothed metric reaching a new minimum.

    The timer starts at iteration 0 and restarts on every improvement and every
    decay. The first observation only seeds the running best.
    """

    def __init__(self, lr: float, factor: float = 0.5, window: int = 5000, smoothing: float = 0.3):
        if not 0 < factor < 1:
            raise ConfigError("scheduler factor must lie in (0, 1)")
        if not 0 < smoothing <= 1:
            raise ConfigError("scheduler smoothing must lie in (0, 1]")
        self.lr = lr
        self.factor = factor
        self.window = window
        self.smoothing = smoothing
        self.ema: float | None = None
        self.best = math.inf
        self.anchor = 0
        self.decays: list[int] = []

    def observe(self, iteration: int, value: float) -> float:
        if self.ema is None:
            self.ema = float(value)
            self.best = self.ema
        else:
            # incremental form keeps a constant stream exactly constant
            self.ema += self.smoothing * (float(value) - self.ema)
            if self.ema < self.best:
                self.best = self.ema
                self.anchor = iteration
        if iteration - self.anchor >= self.window:
            self.lr *= self.factor
            self.anchor = iteration
            self.decays.append(iteration)
        return self.lr


@dataclass
class TrainResult:
    model: TrajGAN
    best_arrays: dict
    log_rows: list = field(default_factory=list)
    best_iteration: int = 0
    best_val_ade: float = math.inf
    iterations: int = 0
    labels: list = field(default_factory=list)

    def log_csv(self) -> str:
        return format_log(self.log_rows)

    def best_model(self) -> TrajGAN:
        return model_from_arrays(self.best_arrays)[0]


def format_log(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOG_HEADER)
    for it, g, d, lr, va, vf in rows:
        w.writerow((it, repr(float(g)), repr(float(d)), repr(float(lr)), repr(float(va)), repr(float(vf))))
    return buf.getvalue()


def split_corpus(n: int, val_fraction: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Random held-out split; tiny corpora validate on the training scenes."""
    perm = rng.permutation(n)
    n_val = int(math.floor(val_fraction * n))
    if n_val == 0 or n_val == n:
        return perm, perm
    return perm[n_val:], perm[:n_val]


class _UniformSampler:
    def __init__(self, n: int, batch: int, rng: np.random.Generator):
        self.n, self.batch, self.rng = n, batch, rng

    def batches_per_epoch(self) -> int:
        return max(1, math.ceil(self.n / self.batch))

    def next_batch(self) -> np.ndarray:
        return self.rng.integers(0, self.n, self.batch)


def discriminator_step(model: TrajGAN, opt: Adam, batch, z, t_pred: int, mode: str,
                       rng: np.random.Generator) -> float:
    """One Adam step on the discriminator; the generator runs without a tape."""
    with no_grad():
        fake = model.gen(batch, z, t_pred).data
    if mode == "random":
        real = rng.random(batch.size) < 0.5
        chosen = np.where(real[:, None, None], batch.future, fake)
        loss = bce_mean(model.dis(full_deltas(batch.obs_deltas, chosen)), real.astype(np.float64))
    else:
        loss = discriminator_loss(model.dis(full_deltas(batch.obs_deltas, batch.future)),
                                  model.dis(full_deltas(batch.obs_deltas, fake)))
    backward(loss)
    opt.step()
    return loss.item()


def generator_step(model: TrajGAN, opt: Adam, batch, z, t_pred: int, weights) -> float:
    """One Adam step on the generator with the discriminator frozen."""
    model.dis.requires_grad_(False)
    try:
        pred = model.gen(batch, z, t_pred)
        loss = generator_loss(weights, model.dis(full_deltas(batch.obs_deltas, pred)), pred, batch.future)
        backward(loss)
    finally:
        model.dis.requires_grad_(True)
    opt.step()
    return loss.item()


def train(config: ExperimentConfig, corpus: list[Scene], labels: list[str] | None = None,
          progress=None) -> TrainResult:
    """Alternate one discriminator and one generator Adam step per batch.

    ``progress`` (optional) is called with each metrics-log row as it is produced.
    """
    if not corpus:
        raise ContractError("train: empty corpus")
    tc = config.train
    window = corpus[0].window
    if any(s.window != window for s in corpus):
        raise ContractError("train: scenes use different window settings")
    if any(not s.has_future for s in corpus):
        raise ContractError("train: every scene needs a ground-truth future")
    if labels is None:
        labels = [label_scene(s, config) for s in corpus]
    seed = config.seeds.train
    rng_split = np.random.default_rng([seed, 2])
    rng_batch = np.random.default_rng([seed, 3])
    rng_aug = np.random.default_rng([seed, 4])
    rng_noise = np.random.default_rng([seed, 5])
    rng_dis = np.random.default_rng([seed, 6])

    model = TrajGAN.from_experiment(config)
    t_pred = window.t_pred
    # crop once: a rotated d-box about the pivot stays inside the d*sqrt(2) box
    reach = config.target_points.crop_distance * math.sqrt(2.0) + 1.0
    cropped = [s.replace(map_ref=crop_drivable(s.map_ref, s.last_observed(), reach)) for s in corpus]
    train_idx, val_idx = split_corpus(len(corpus), tc.val_fraction, rng_split)
    train_scenes = [cropped[i] for i in train_idx]
    train_labels = [labels[i] for i in train_idx]
    val_scenes = [cropped[i] for i in val_idx]
    val_inputs = [eval_inputs(s, config) for s in val_scenes]
    val_feats = [f for f, _ in val_inputs]
    val_z = np.stack([z for _, z in val_inputs])
    val_truth = np.stack([f.future for f in val_feats])

    if tc.class_balance:
        missing = [c for c in (STRAIGHT, CURVE) if c not in train_labels]
        if missing:
            raise ConfigError(f"class-balanced training needs both classes; missing {missing}")
        sampler = BalancedSampler(train_labels, tc.batch, rng_batch, tc.straight_fraction)
    else:
        sampler = _UniformSampler(len(train_scenes), tc.batch, rng_batch)
    total = tc.max_iterations or tc.epochs * sampler.batches_per_epoch()

    gen_params, dis_params = model.gen.parameters(), model.dis.parameters()
    opt_g = Adam(gen_params, lr=tc.lr)
    opt_d = Adam(dis_params, lr=tc.lr)
    sched = PlateauScheduler(tc.lr, tc.scheduler_factor, tc.plateau_window, tc.smoothing)
    result = TrainResult(model, model_arrays(model, window), labels=labels)
    g_acc = d_acc = 0.0
    n_acc = 0

    for it in range(1, total + 1):
        idx = sampler.next_batch()
        feats = [prepare_scene(augment(train_scenes[i], rng_aug, config.augment), rng_aug, config)
                 for i in idx]
        batch = collate(feats)
        z = rng_noise.standard_normal((batch.size, config.model.noise_dim))

        d_loss = discriminator_step(model, opt_d, batch, z, t_pred, tc.dis_input, rng_dis)
        g_loss = generator_step(model, opt_g, batch, z, t_pred, config.loss)

        g_acc += g_loss
        d_acc += d_loss
        n_acc += 1
        if it % tc.eval_interval == 0 or it == total:
            local = predict_local(model, val_feats, val_z, t_pred)
            va = float(np.mean(ade(local, val_truth)))
            vf = float(np.mean(fde(local, val_truth)))
            lr = sched.observe(it, va)
            opt_g.lr = opt_d.lr = lr
            row = (it, g_acc / n_acc, d_acc / n_acc, lr, va, vf)
            result.log_rows.append(row)
            g_acc = d_acc = 0.0
            n_acc = 0
            if va < result.best_val_ade:
                result.best_val_ade = va
                result.best_iteration = it
                result.best_arrays = model_arrays(model, window)
            log.info("iter %d g=%.4f d=%.4f lr=%.2e val_ade=%.3f val_fde=%.3f", *row)
            if progress is not None:
                progress(row)
    result.iterations = total
    return result
