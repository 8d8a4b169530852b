"""Physical context: AGENT dynamics at the last observation and goal points
sampled inside the drivable area under a constant-velocity reachability model."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .config import TargetConfig
from .errors import ContractError
from .geometry import polygon_area, to_global, to_local
from .scene import AgentTrack, DrivableArea, Scene


@dataclass(frozen=True)
class DynamicState:
    speed: float
    heading: float
    position: np.ndarray
    stationary: bool = False


def estimate_dynamics(track: AgentTrack | np.ndarray, decay: float = 0.9, hz: float = 10.0,
                      stationary_speed: float = 0.25) -> DynamicState:
    """Exponentially weighted speed and heading over the observed displacements.

    The displacement ending at the last frame gets weight 1, the one before it
    ``decay``, and so on. Heading is the weighted mean on the circle (sum of unit
    vectors, then atan2) over non-zero displacements.
    """
    pos = track.xy if isinstance(track, AgentTrack) else np.asarray(track, dtype=np.float64)
    if len(pos) < 2:
        raise ContractError("estimate_dynamics needs at least two observed frames")
    if not 0.0 < decay <= 1.0:
        raise ContractError(f"decay must lie in (0, 1], got {decay}")
    d = np.diff(pos, axis=0)
    step = np.hypot(d[:, 0], d[:, 1])
    w = decay ** np.arange(len(d) - 1, -1, -1, dtype=np.float64)
    speed = float(np.dot(w, step) / w.sum() * hz)
    moving = step > 0.0
    position = np.array(pos[-1], dtype=np.float64)
    if not moving.any():
        return DynamicState(0.0, 0.0, position, True)
    unit = d[moving] / step[moving, None]
    sx = float(np.dot(w[moving], unit[:, 1]))
    cx = float(np.dot(w[moving], unit[:, 0]))
    heading = math.atan2(sx, cx)
    if heading == -math.pi:
        heading = math.pi
    return DynamicState(speed, heading, position, speed < stationary_speed)


def crop_drivable(area: DrivableArea, center, d: float) -> DrivableArea:
    """Clip every polygon to the axis-aligned square of half-width ``d`` around ``center``."""
    if d <= 0:
        raise ContractError(f"crop distance must be positive, got {d}")
    cx, cy = float(center[0]), float(center[1])
    box = (cx - d, cy - d, cx + d, cy + d)
    out = []
    for k in area.candidates(*box):
        poly = area.polygons[k]
        x0, y0, x1, y1 = area.bboxes[k]
        if x0 >= box[0] and y0 >= box[1] and x1 <= box[2] and y1 <= box[3]:
            out.append(poly)
            continue
        clipped = kernels.clip_polygon_box(poly, *box)
        if len(clipped) >= 3 and polygon_area(clipped) > 1e-12:
            out.append(clipped)
    return DrivableArea(out)


@dataclass(frozen=True, eq=False)
class TargetPointSet:
    points: np.ndarray  # [L, 2] agent-local (origin = last observation, +x = heading)
    origin: np.ndarray
    heading: float
    fallback: bool = False

    @property
    def count(self) -> int:
        return len(self.points)

    def global_points(self) -> np.ndarray:
        return to_global(self.points, self.origin, self.heading)


def sample_target_points(state: DynamicState, area: DrivableArea, num_points: int,
                         t_pred: float, rng: np.random.Generator,
                         config: TargetConfig = TargetConfig()) -> TargetPointSet:
    """Rejection-sample goal points from the annulus sector
    ``radius in speed*t_pred*(1 +- rho)``, ``bearing in heading +- phi_max``.

    Stationary agents draw from a disc of ``stationary_radius`` instead. Short
    results are padded by cycling the accepted points; with nothing accepted the
    constant-velocity point (clamped to the nearest drivable point) is repeated.
    """
    if num_points < 1:
        raise ContractError("num_points must be >= 1")
    origin = np.asarray(state.position, dtype=np.float64)
    heading = state.heading
    reach = state.speed * t_pred
    batch = max(4 * num_points, 64)
    accepted: list[np.ndarray] = []
    n_acc = 0
    drawn = 0
    while n_acc < num_points and drawn < config.max_attempts and area:
        m = min(batch, config.max_attempts - drawn)
        drawn += m
        if state.stationary:
            r = config.stationary_radius * np.sqrt(rng.random(m))
            bearing = rng.uniform(-math.pi, math.pi, m)
        else:
            r = rng.uniform(reach * (1.0 - config.rho), reach * (1.0 + config.rho), m)
            bearing = rng.uniform(-config.phi_max, config.phi_max, m)
        local = np.column_stack([r * np.cos(bearing), r * np.sin(bearing)])
        ok = area.contains_many(to_global(local, origin, heading))
        if ok.any():
            accepted.append(local[ok])
            n_acc += int(ok.sum())
    if n_acc:
        pts = np.concatenate(accepted)
        if len(pts) < num_points:
            pts = pts[np.arange(num_points) % len(pts)]
        return TargetPointSet(pts[:num_points].copy(), origin, heading, n_acc < num_points)
    cv_local = np.array([0.0 if state.stationary else reach, 0.0])
    if area:
        cv_local = _clamp_inside(area, cv_local, origin, heading)
    return TargetPointSet(np.tile(cv_local, (num_points, 1)), origin, heading, True)


def _clamp_inside(area: DrivableArea, local: np.ndarray, origin, heading: float) -> np.ndarray:
    """Nearest drivable point to ``local``, pushed just past the boundary so the
    frame round trip cannot land it outside."""
    p = to_global(local, origin, heading)
    if area.contains_many(p[None])[0]:
        return local
    q = area.nearest_point(p)
    step = q - p
    norm = float(np.hypot(*step))
    direction = step / norm if norm > 0 else np.zeros(2)
    for eps in (1e-9, 1e-6, 1e-3):
        cand = to_local(q + eps * direction, origin, heading)
        if area.contains_many(to_global(cand, origin, heading)[None])[0]:
            return cand
    return to_local(q, origin, heading)


def extract_target_points(scene: Scene, rng: np.random.Generator,
                          config: TargetConfig = TargetConfig()) -> tuple[DynamicState, TargetPointSet]:
    """Dynamics from the AGENT's observed window, map crop around the last
    observation, then goal sampling."""
    state = estimate_dynamics(scene.agent_observed(), config.decay, scene.hz, config.stationary_speed)
    area = crop_drivable(scene.map_ref, state.position, config.crop_distance)
    tps = sample_target_points(state, area, config.num_points, scene.t_pred / scene.hz, rng, config)
    return state, tps
