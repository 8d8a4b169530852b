"""Scene -> network inputs, all in the AGENT-local frame (origin at the last
observed AGENT position, +x along the estimated heading)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .errors import ContractError
from .geometry import to_global, to_local
from .scene import Role, Scene
from .target_points import TargetPointSet, extract_target_points


def observed_agents(scene: Scene):
    """AGENT first, then every other track with at least two observed frames."""
    agent = scene.agent
    rest = [t for t in scene.tracks if t.role is not Role.AGENT and t.frames_in(0, scene.t_obs) >= 2]
    return [agent] + rest


@dataclass(frozen=True, eq=False)
class SceneFeatures:
    scene_id: str
    origin: np.ndarray        # [2] global
    heading: float
    agent_deltas: np.ndarray  # [N, t_obs - 1, 2] local, row 0 is the AGENT
    targets: TargetPointSet
    future: np.ndarray | None  # [t_pred, 2] local positions, or None

    @property
    def obs_deltas(self) -> np.ndarray:
        return self.agent_deltas[0]

    @property
    def num_agents(self) -> int:
        return len(self.agent_deltas)

    def to_global(self, local: np.ndarray) -> np.ndarray:
        return to_global(local, self.origin, self.heading)


def prepare_scene(scene: Scene, rng: np.random.Generator,
                  config: ExperimentConfig = ExperimentConfig()) -> SceneFeatures:
    state, tps = extract_target_points(scene, rng, config.target_points)
    origin, heading = tps.origin, tps.heading
    rows = []
    for track in observed_agents(scene):
        pos = track.filled(0, scene.t_obs)
        rows.append(to_local(np.diff(pos, axis=0), 0.0, heading))
    future = None
    if scene.has_future:
        future = to_local(scene.agent_future(), origin, heading)
    return SceneFeatures(scene.scene_id, origin, heading, np.stack(rows), tps, future)


@dataclass(frozen=True, eq=False)
class Batch:
    agent_deltas: np.ndarray  # [A, t_obs - 1, 2] agents of all scenes, stacked
    groups: np.ndarray        # [A] scene index of each row
    agent_rows: np.ndarray    # [B] row of each scene's AGENT
    targets: np.ndarray       # [B, L, 2]
    obs_deltas: np.ndarray    # [B, t_obs - 1, 2]
    future: np.ndarray | None  # [B, t_pred, 2]

    @property
    def size(self) -> int:
        return len(self.agent_rows)


def collate(items: list[SceneFeatures]) -> Batch:
    if not items:
        raise ContractError("collate: empty batch")
    counts = [f.num_agents for f in items]
    groups = np.repeat(np.arange(len(items)), counts)
    agent_rows = np.concatenate(([0], np.cumsum(counts)[:-1])).astype(np.int64)
    futures = [f.future for f in items]
    future = None if any(f is None for f in futures) else np.stack(futures)
    return Batch(
        agent_deltas=np.concatenate([f.agent_deltas for f in items]),
        groups=groups,
        agent_rows=agent_rows,
        targets=np.stack([f.targets.points for f in items]),
        obs_deltas=np.stack([f.obs_deltas for f in items]),
        future=future,
    )
