"""Displacement transforms, RANSAC straight/curve labelling, the class-balanced
batch sampler and training-time augmentation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .config import AugmentConfig, RansacConfig
from .errors import ConfigError, ContractError, MalformedSceneError
from .geometry import rotate_about
from .scene import AgentTrack, Scene

STRAIGHT = "straight"
CURVE = "curve"


@dataclass(frozen=True, eq=False)
class DisplacementTrack:
    origin: np.ndarray  # absolute position at the first frame
    deltas: np.ndarray  # [n - 1, 2]

    def positions(self) -> np.ndarray:
        return np.vstack([self.origin, self.origin + np.cumsum(self.deltas, axis=0)])


def to_displacements(track: AgentTrack | np.ndarray, frames: range | None = None) -> DisplacementTrack:
    """Per-frame displacement vectors over ``frames`` (gaps filled by replication).

    Accepts an AgentTrack or an already-filled [n, 2] position array.
    """
    if isinstance(track, AgentTrack):
        if frames is None:
            frames = range(int(track.frames[0]), int(track.frames[-1]) + 1)
        if len(frames) == 0:
            raise MalformedSceneError("to_displacements: empty frame range")
        pos = track.filled(frames.start, frames.stop)
    else:
        pos = np.asarray(track, dtype=np.float64).reshape(-1, 2)
        if frames is not None:
            pos = pos[frames.start:frames.stop]
        if len(pos) == 0:
            raise MalformedSceneError("to_displacements: empty frame range")
    origin = pos[0].copy()
    deltas = np.diff(pos, axis=0)
    return DisplacementTrack(origin, deltas)


# ---------------------------------------------------------------- curvature


@dataclass(frozen=True)
class CurvatureLabel:
    label: str
    inlier_fraction: float
    max_consecutive_outlier_fraction: float

    @property
    def is_curve(self) -> bool:
        return self.label == CURVE


def _fit_line(points: np.ndarray):
    """Total least-squares line: centroid and unit direction, or None if degenerate."""
    center = points.mean(axis=0)
    centered = points - center
    if not np.any(np.abs(centered) > 1e-12):
        return None
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    return center, vt[0]


def classify_curvature(track: AgentTrack | np.ndarray, rng: np.random.Generator,
                       config: RansacConfig = RansacConfig()) -> CurvatureLabel:
    """RANSAC straight/curve label for a whole trajectory.

    Each trial fits a line to a random ``min_samples`` fraction of the points and
    counts points within ``tolerance`` (perpendicular distance); the best model is
    refit on its inliers. The trajectory is a curve when the longest run of
    consecutive points farther than ``tolerance`` covers at least
    ``curve_run_fraction`` of the points.
    """
    pts = track.xy if isinstance(track, AgentTrack) else np.asarray(track, dtype=np.float64)
    n = len(pts)
    if n < 5:
        raise ContractError(f"classify_curvature needs >= 5 points, got {n}")
    if _fit_line(pts) is None:
        return CurvatureLabel(STRAIGHT, 1.0, 0.0)
    k = max(2, int(math.ceil(config.min_samples * n)))
    best, best_count = None, -1
    for _ in range(config.max_trials):
        idx = rng.choice(n, size=k, replace=False)
        line = _fit_line(pts[idx])
        if line is None:
            continue
        count = int(np.count_nonzero(kernels.line_distances(pts, *line) <= config.tolerance))
        if count > best_count:
            best, best_count = line, count
    if best is None:
        best = _fit_line(pts)
    inliers = kernels.line_distances(pts, *best) <= config.tolerance
    refit = _fit_line(pts[inliers]) if inliers.sum() >= 2 else None
    if refit is not None:
        best = refit
    dist = kernels.line_distances(pts, *best)
    outlier = dist > config.tolerance
    run = kernels.longest_run(outlier) / n
    label = CURVE if run >= config.curve_run_fraction else STRAIGHT
    return CurvatureLabel(label, float(np.count_nonzero(~outlier)) / n, float(run))


# ---------------------------------------------------------------- sampler


def class_counts(batch: int, straight_fraction: float = 0.3) -> tuple[int, int]:
    """Straight count is round(fraction * batch) (half-up); curves take the rest."""
    n_straight = int(math.floor(straight_fraction * batch + 0.5))
    return n_straight, batch - n_straight


class BalancedSampler:
    """Per-class shuffled queues; a class that runs dry within an epoch is
    reshuffled and drawn again (sampling with replacement across refills)."""

    def __init__(self, labels: Sequence[str], batch: int, rng: np.random.Generator,
                 straight_fraction: float = 0.3):
        labels = [lab.label if isinstance(lab, CurvatureLabel) else lab for lab in labels]
        self.straight = np.flatnonzero(np.array([lab == STRAIGHT for lab in labels], dtype=bool))
        self.curve = np.flatnonzero(np.array([lab == CURVE for lab in labels], dtype=bool))
        self.n_straight, self.n_curve = class_counts(batch, straight_fraction)
        if self.n_straight and not len(self.straight):
            raise ConfigError("balanced sampler: class 'straight' is empty")
        if self.n_curve and not len(self.curve):
            raise ConfigError("balanced sampler: class 'curve' is empty")
        self.batch = batch
        self.total = len(labels)
        self.rng = rng
        self._queues = {STRAIGHT: [], CURVE: []}

    def _take(self, cls: str, pool: np.ndarray, count: int) -> list[int]:
        out: list[int] = []
        queue = self._queues[cls]
        while len(out) < count:
            if not queue:
                queue.extend(self.rng.permutation(pool).tolist())
            need = count - len(out)
            out.extend(queue[:need])
            del queue[:need]
        return out

    def next_batch(self) -> np.ndarray:
        idx = self._take(STRAIGHT, self.straight, self.n_straight) + \
            self._take(CURVE, self.curve, self.n_curve)
        return self.rng.permutation(np.array(idx, dtype=np.int64))

    def batches_per_epoch(self) -> int:
        return max(1, math.ceil(self.total / self.batch))

    def epoch(self) -> Iterator[np.ndarray]:
        self._queues = {STRAIGHT: [], CURVE: []}
        for _ in range(self.batches_per_epoch()):
            yield self.next_batch()


def balanced_batches(scenes: Sequence[Scene], labels: Sequence, batch: int,
                     rng: np.random.Generator, straight_fraction: float = 0.3,
                     epochs: int = 1) -> Iterator[list[Scene]]:
    if len(scenes) != len(labels):
        raise ContractError("balanced_batches: scenes and labels differ in length")
    sampler = BalancedSampler(labels, batch, rng, straight_fraction)
    for _ in range(epochs):
        for idx in sampler.epoch():
            yield [scenes[i] for i in idx]


# ---------------------------------------------------------------- augmentation


def augment(scene: Scene, rng: np.random.Generator, config: AugmentConfig = AugmentConfig()) -> Scene:
    """Rotate the whole scene about the AGENT's last observation, add Gaussian noise to
    observed positions, then drop observed frames (replaced by the previous kept one)."""
    if not config.enabled:
        return scene
    t_obs = scene.t_obs
    tracks = list(scene.tracks)
    area = scene.map_ref
    if config.rotate:
        theta = rng.uniform(0.0, 2.0 * math.pi)
        pivot = scene.last_observed()
        tracks = [t.transformed(rotate_about(t.xy, theta, pivot)) for t in tracks]
        area = area.transformed(lambda p: rotate_about(p, theta, pivot))
    out = []
    for t in tracks:
        xy = np.array(t.xy)
        obs = t.frames < t_obs
        if config.noise_sigma > 0 and (config.noise_all_tracks or t.role.value == "AGENT"):
            xy[obs] += rng.normal(0.0, config.noise_sigma, (int(obs.sum()), 2))
        if config.drop_prob > 0:
            idx = np.flatnonzero(obs)
            drop = rng.random(len(idx)) < config.drop_prob
            drop[:1] = False
            for j, d in zip(idx, drop):
                if d:
                    xy[j] = xy[j - 1]
        out.append(t.transformed(xy))
    return scene.replace(tracks=tuple(out), map_ref=area)
