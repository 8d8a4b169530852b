"""Forecasting scenes: domain types, CSV/JSON I/O and a synthetic scene generator."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import kernels
from .config import WindowConfig
from .errors import MalformedSceneError, SceneFormatError
from .geometry import corridor_polygon, resample_polyline, signed_area

CSV_COLUMNS = ("TIMESTAMP", "TRACK_ID", "OBJECT_TYPE", "X", "Y", "CITY_NAME")
SYNTHETIC_CITY = "SYN"


class Role(str, Enum):
    AGENT = "AGENT"
    AV = "AV"
    OTHER = "OTHER"

    @classmethod
    def from_csv(cls, value: str) -> "Role":
        v = value.strip().upper()
        if v in ("OTHERS", "OTHER"):
            return cls.OTHER
        try:
            return cls(v)
        except ValueError:
            raise SceneFormatError(f"unknown OBJECT_TYPE {value!r}") from None

    @property
    def csv_name(self) -> str:
        return "OTHERS" if self is Role.OTHER else self.value


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AgentTrack:
    track_id: str
    role: Role
    frames: np.ndarray  # int64, strictly increasing
    xy: np.ndarray      # [n, 2] metres

    def __post_init__(self):
        frames = np.array(self.frames, dtype=np.int64).reshape(-1)
        xy = np.array(self.xy, dtype=np.float64).reshape(-1, 2)
        if len(frames) != len(xy):
            raise MalformedSceneError(f"track {self.track_id}: {len(frames)} frames vs {len(xy)} positions")
        if len(frames) > 1 and np.any(np.diff(frames) <= 0):
            raise SceneFormatError(f"track {self.track_id}: frame indices not strictly increasing")
        object.__setattr__(self, "frames", _readonly(frames))
        object.__setattr__(self, "xy", _readonly(xy))

    def __len__(self):
        return len(self.frames)

    def __eq__(self, other):
        if not isinstance(other, AgentTrack):
            return NotImplemented
        return (self.track_id == other.track_id and self.role == other.role
                and np.array_equal(self.frames, other.frames) and np.array_equal(self.xy, other.xy))

    __hash__ = None

    def covers(self, start: int, stop: int) -> bool:
        return np.isin(np.arange(start, stop), self.frames).all()

    def frames_in(self, start: int, stop: int) -> int:
        return int(np.count_nonzero((self.frames >= start) & (self.frames < stop)))

    def filled(self, start: int, stop: int) -> np.ndarray:
        """Positions for frames [start, stop): gaps and the tail replicate the last
        seen frame; frames before the first appearance replicate the first one."""
        if stop <= start:
            raise MalformedSceneError("empty frame range")
        present = (self.frames >= start) & (self.frames < stop)
        if not present.any():
            raise MalformedSceneError(f"track {self.track_id} has no frames in [{start}, {stop})")
        idx = np.searchsorted(self.frames, np.arange(start, stop), side="right") - 1
        first = int(np.flatnonzero(present)[0])
        idx = np.where(idx < first, first, idx)
        return self.xy[idx].copy()

    def transformed(self, xy: np.ndarray) -> "AgentTrack":
        return AgentTrack(self.track_id, self.role, self.frames, xy)


class DrivableArea:
    """Union of simple polygons; a point is drivable if it lies inside or on the
    boundary of any polygon."""

    def __init__(self, polygons):
        polys = []
        for k, poly in enumerate(polygons):
            p = np.array(poly, dtype=np.float64).reshape(-1, 2)
            if len(p) < 3:
                raise MalformedSceneError(f"polygon {k} has fewer than 3 vertices")
            if signed_area(p) < 0:
                p = p[::-1].copy()
            polys.append(_readonly(p))
        self.polygons: tuple[np.ndarray, ...] = tuple(polys)
        if polys:
            self._bbox = np.array([[p[:, 0].min(), p[:, 1].min(), p[:, 0].max(), p[:, 1].max()]
                                   for p in polys])
        else:
            self._bbox = np.zeros((0, 4))

    def __len__(self):
        return len(self.polygons)

    def __bool__(self):
        return bool(self.polygons)

    def __eq__(self, other):
        if not isinstance(other, DrivableArea):
            return NotImplemented
        return len(self) == len(other) and all(
            np.array_equal(a, b) for a, b in zip(self.polygons, other.polygons))

    __hash__ = None

    @property
    def bboxes(self) -> np.ndarray:
        return self._bbox

    def candidates(self, xmin, ymin, xmax, ymax) -> np.ndarray:
        """Indices of polygons whose bounding box meets the query box."""
        b = self._bbox
        hit = (b[:, 0] <= xmax) & (b[:, 2] >= xmin) & (b[:, 1] <= ymax) & (b[:, 3] >= ymin)
        return np.flatnonzero(hit)

    def contains_many(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        inside = np.zeros(len(pts), dtype=bool)
        if not len(pts) or not self.polygons:
            return inside
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        for k in self.candidates(lo[0], lo[1], hi[0], hi[1]):
            todo = ~inside
            if not todo.any():
                break
            x0, y0, x1, y1 = self._bbox[k]
            sub = todo & (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)
            if sub.any():
                inside[sub] = kernels.points_in_polygon(pts[sub], self.polygons[k])
        return inside

    def contains(self, p) -> bool:
        return bool(self.contains_many(np.asarray(p, dtype=np.float64).reshape(1, 2))[0])

    def nearest_point(self, p) -> np.ndarray | None:
        """Closest drivable point to ``p`` (``p`` itself when already drivable)."""
        p = np.asarray(p, dtype=np.float64)
        if not self.polygons:
            return None
        if self.contains(p):
            return p.copy()
        best, best_d = None, math.inf
        for poly in self.polygons:
            q, d = kernels.nearest_on_polygon(p, poly)
            if d < best_d:
                best, best_d = q, d
        return best

    def transformed(self, fn) -> "DrivableArea":
        return DrivableArea([fn(p) for p in self.polygons])

    def to_json(self) -> str:
        return json.dumps({"polygons": [p.tolist() for p in self.polygons]})

    @classmethod
    def from_json(cls, text: str) -> "DrivableArea":
        try:
            obj = json.loads(text)
            polys = obj["polygons"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise SceneFormatError(f"bad map JSON: {exc}") from None
        return cls(polys)


def point_in_drivable(area: DrivableArea, p) -> bool:
    return area.contains(p)


def load_map(path) -> DrivableArea:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"map file not found: {path}")
    return DrivableArea.from_json(path.read_text(encoding="utf-8"))


def save_map(area: DrivableArea, path) -> None:
    Path(path).write_text(area.to_json(), encoding="utf-8")


@dataclass(frozen=True, eq=False)
class Scene:
    scene_id: str
    tracks: tuple[AgentTrack, ...]
    map_ref: DrivableArea = field(repr=False)
    t_obs: int = 20
    t_pred: int = 30
    hz: float = 10.0

    def __post_init__(self):
        tracks = tuple(self.tracks)
        object.__setattr__(self, "tracks", tracks)
        agents = [t for t in tracks if t.role is Role.AGENT]
        if len(agents) != 1:
            raise MalformedSceneError(f"scene {self.scene_id}: expected exactly one AGENT, got {len(agents)}")
        total = self.t_obs + self.t_pred
        for t in tracks:
            if len(t) and (t.frames[0] < 0 or t.frames[-1] >= total):
                raise MalformedSceneError(
                    f"scene {self.scene_id}: track {t.track_id} has frames outside [0, {total})")
        if not agents[0].covers(0, self.t_obs):
            raise MalformedSceneError(f"scene {self.scene_id}: AGENT does not cover the observation window")

    def __eq__(self, other):
        if not isinstance(other, Scene):
            return NotImplemented
        return (self.scene_id == other.scene_id and self.tracks == other.tracks
                and self.t_obs == other.t_obs and self.t_pred == other.t_pred
                and self.hz == other.hz and self.map_ref == other.map_ref)

    __hash__ = None

    @property
    def window(self) -> WindowConfig:
        return WindowConfig(self.t_obs, self.t_pred, self.hz)

    @property
    def agent(self) -> AgentTrack:
        return next(t for t in self.tracks if t.role is Role.AGENT)

    @property
    def has_future(self) -> bool:
        return self.agent.covers(0, self.t_obs + self.t_pred)

    def agent_observed(self) -> np.ndarray:
        return self.agent.filled(0, self.t_obs)

    def agent_future(self) -> np.ndarray:
        if not self.has_future:
            raise MalformedSceneError(f"scene {self.scene_id} has no ground-truth future")
        return self.agent.filled(self.t_obs, self.t_obs + self.t_pred)

    def last_observed(self) -> np.ndarray:
        return self.agent_observed()[-1]

    def replace(self, **changes) -> "Scene":
        kw = dict(scene_id=self.scene_id, tracks=self.tracks, map_ref=self.map_ref,
                  t_obs=self.t_obs, t_pred=self.t_pred, hz=self.hz)
        kw.update(changes)
        return Scene(**kw)


def read_scene_csv(path, area: DrivableArea, config: WindowConfig = WindowConfig(),
                   require_future: bool = True) -> Scene:
    """Parse an Argoverse-style CSV; timestamps are rounded to the nearest frame."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise MalformedSceneError(f"{path}: empty file")
        header = [h.strip() for h in header]
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise SceneFormatError(f"{path}: missing columns {missing}")
        col = {name: header.index(name) for name in CSV_COLUMNS}
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append((float(row[col["TIMESTAMP"]]), row[col["TRACK_ID"]],
                             Role.from_csv(row[col["OBJECT_TYPE"]]),
                             float(row[col["X"]]), float(row[col["Y"]])))
            except (IndexError, ValueError) as exc:
                raise SceneFormatError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise MalformedSceneError(f"{path}: no data rows")
    t0 = min(r[0] for r in rows)
    grouped: dict[str, list] = {}
    roles: dict[str, Role] = {}
    for ts, tid, role, x, y in rows:
        if tid in roles and roles[tid] is not role:
            raise SceneFormatError(f"{path}: track {tid} changes OBJECT_TYPE")
        roles[tid] = role
        grouped.setdefault(tid, []).append((int(round((ts - t0) * config.hz)), x, y))
    agents = [tid for tid, r in roles.items() if r is Role.AGENT]
    if len(agents) != 1:
        raise MalformedSceneError(f"{path}: expected exactly one AGENT track, found {len(agents)}")
    tracks = []
    for tid, items in grouped.items():
        frames = [f for f, _, _ in items]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise SceneFormatError(f"{path}: timestamps of track {tid} are not strictly increasing")
        tracks.append(AgentTrack(tid, roles[tid], frames, [(x, y) for _, x, y in items]))
    scene = Scene(path.stem, tuple(tracks), area, config.t_obs, config.t_pred, config.hz)
    if require_future and not scene.has_future:
        raise MalformedSceneError(f"{path}: AGENT track does not cover all "
                                  f"{config.total} frames")
    return scene


def write_scene_csv(scene: Scene, path, city: str = SYNTHETIC_CITY) -> None:
    """Rows ordered by frame, then by track order; floats written with repr()."""
    rows = []
    for order, t in enumerate(scene.tracks):
        for f, (x, y) in zip(t.frames, t.xy):
            rows.append((int(f), order, t.track_id, t.role.csv_name, x, y))
    rows.sort(key=lambda r: (r[0], r[1]))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for f, _, tid, role, x, y in rows:
            w.writerow((repr(f / scene.hz), tid, role, repr(float(x)), repr(float(y)), city))


# ---------------------------------------------------------------- synthetic data

SCENE_KINDS = ("straight", "curve", "brake", "turn_with_traffic")
STRAIGHT_KINDS = ("straight", "brake")
CURVE_KINDS = ("curve", "turn_with_traffic")
LANE_HALF_WIDTH = 4.0
SUBSTEPS = 50


def construction_label(kind: str) -> str:
    if kind in STRAIGHT_KINDS:
        return "straight"
    if kind in CURVE_KINDS:
        return "curve"
    raise ValueError(f"unknown scene kind {kind!r}")


def _integrate(speed_fn, yaw_rate_fn, start, heading0, total, dt):
    """Midpoint integration of a unicycle on a fine grid; both rate functions take
    arrays of times. Returns positions at each frame."""
    h = dt / SUBSTEPS
    n = (total - 1) * SUBSTEPS
    t = np.arange(n) * h
    tm = t + 0.5 * h
    psi = heading0 + np.concatenate(([0.0], np.cumsum(h * yaw_rate_fn(tm))))
    psi_mid = psi[:-1] + 0.5 * h * yaw_rate_fn(t)
    step = (h * speed_fn(tm))[:, None] * np.column_stack([np.cos(psi_mid), np.sin(psi_mid)])
    path = np.vstack([np.zeros(2), np.cumsum(step, axis=0)]) + np.asarray(start, dtype=np.float64)
    return path[::SUBSTEPS].copy()


def _agent_path(kind, rng, total, dt):
    heading0 = rng.uniform(-math.pi, math.pi)
    start = rng.uniform(-20.0, 20.0, 2)
    times = np.arange(total) * dt
    direction = np.array([math.cos(heading0), math.sin(heading0)])
    if kind == "straight":
        v0 = rng.uniform(5.0, 14.0)
        acc = rng.uniform(-0.5, 0.5)
        s = v0 * times + 0.5 * acc * times ** 2
        return start + s[:, None] * direction
    if kind == "brake":
        v0 = rng.uniform(8.0, 14.0)
        t_b = rng.uniform(1.0, 3.0)
        dec = rng.uniform(3.0, 6.0)
        t_stop = t_b + v0 / dec
        tc = np.minimum(times, t_stop)
        s = np.where(tc < t_b, v0 * tc, v0 * t_b + v0 * (tc - t_b) - 0.5 * dec * (tc - t_b) ** 2)
        return start + s[:, None] * direction
    if kind == "curve":
        # speed * turn kept large enough that the sweep is unambiguously curved
        v = rng.uniform(9.0, 14.0)
        turn = math.radians(rng.uniform(max(1200.0 / v, 80.0), 150.0)) * rng.choice([-1.0, 1.0])
        omega = turn / (total * dt)
        psi = heading0 + omega * times
        r = v / omega
        x = start[0] + r * (np.sin(psi) - math.sin(heading0))
        y = start[1] - r * (np.cos(psi) - math.cos(heading0))
        return np.column_stack([x, y])
    if kind == "turn_with_traffic":
        v = rng.uniform(7.0, 11.0)
        t_turn = rng.uniform(0.8, 2.0)
        turn = math.radians(rng.uniform(80.0, 110.0)) * rng.choice([-1.0, 1.0])
        duration = rng.uniform(1.8, 2.6)
        omega = turn / duration

        def yaw(t):
            return np.where((t >= t_turn) & (t < t_turn + duration), omega, 0.0)

        return _integrate(lambda t: np.full_like(t, v), yaw, start, heading0, total, dt)
    raise ValueError(f"unknown scene kind {kind!r}")


def _road_for(xy: np.ndarray, heading: float, extend_back: float, extend_front: float):
    d = np.array([math.cos(heading), math.sin(heading)])
    line = np.vstack([xy[0] - extend_back * d, xy[-1] + extend_front * d])
    if np.allclose(line[0], line[1]):
        line[1] = line[0] + d
    return corridor_polygon(line, 3.5)


def generate_synthetic_scene(seed: int, kind: str, window: WindowConfig = WindowConfig(),
                             scene_id: str | None = None) -> Scene:
    """Deterministic synthetic scene: an AGENT manoeuvre of the given kind, an AV,
    0-6 OTHER agents and a drivable map covering every agent's road."""
    if kind not in SCENE_KINDS:
        raise ValueError(f"unknown scene kind {kind!r}; expected one of {SCENE_KINDS}")
    rng = np.random.default_rng([seed, SCENE_KINDS.index(kind)])
    total = window.total
    dt = 1.0 / window.hz
    agent_xy = _agent_path(kind, rng, total, dt)

    steps = np.diff(agent_xy, axis=0)
    moving = np.hypot(steps[:, 0], steps[:, 1]) > 1e-9
    first_dir = steps[np.flatnonzero(moving)[0]]
    last_dir = steps[np.flatnonzero(moving)[-1]]
    h_first = math.atan2(first_dir[1], first_dir[0])
    h_last = math.atan2(last_dir[1], last_dir[0])
    center = np.vstack([
        agent_xy[0] - 15.0 * np.array([math.cos(h_first), math.sin(h_first)]),
        agent_xy,
        agent_xy[-1] + 45.0 * np.array([math.cos(h_last), math.sin(h_last)]),
    ])
    polygons = [corridor_polygon(resample_polyline(center, 1.0), LANE_HALF_WIDTH)]
    tracks = [AgentTrack("agent", Role.AGENT, np.arange(total), agent_xy)]

    def straight_actor(track_id, role, frames, anchor, heading, speed):
        d = np.array([math.cos(heading), math.sin(heading)])
        t = (frames - frames[0]) * dt
        xy = anchor + (speed * t)[:, None] * d
        polygons.append(_road_for(xy, heading, 20.0, 20.0))
        return AgentTrack(track_id, role, frames, xy)

    av_heading = h_first + rng.uniform(-0.3, 0.3) + (math.pi if rng.random() < 0.3 else 0.0)
    av_anchor = agent_xy[0] + rng.uniform(-25.0, 25.0, 2)
    tracks.append(straight_actor("av", Role.AV, np.arange(total), av_anchor, av_heading,
                                 rng.uniform(0.0, 12.0)))

    lo, hi = (2, 7) if kind == "turn_with_traffic" else (0, 7)
    for k in range(int(rng.integers(lo, hi))):
        a = int(rng.integers(0, 10))
        b = int(rng.integers(max(a + 5, 25), total + 1))
        frames = np.arange(a, b)
        ref = int(rng.integers(0, total))
        ref_dir = agent_xy[min(ref + 1, total - 1)] - agent_xy[max(ref - 1, 0)]
        ref_heading = math.atan2(ref_dir[1], ref_dir[0]) if np.any(ref_dir) else h_first
        if rng.random() < 0.5:
            heading = ref_heading + rng.normal(0.0, 0.1) + (math.pi if rng.random() < 0.3 else 0.0)
        else:
            heading = rng.uniform(-math.pi, math.pi)
        lateral = rng.uniform(5.0, 15.0) * rng.choice([-1.0, 1.0])
        normal = np.array([-math.sin(ref_heading), math.cos(ref_heading)])
        anchor = agent_xy[ref] + lateral * normal + rng.normal(0.0, 5.0, 2)
        speed = 0.0 if rng.random() < 0.2 else rng.uniform(2.0, 12.0)
        tracks.append(straight_actor(f"other{k}", Role.OTHER, frames, anchor, heading, speed))

    area = DrivableArea(polygons)
    # first-appearance order, which is the order a timestamp-sorted CSV yields
    tracks.sort(key=lambda t: int(t.frames[0]))
    return Scene(scene_id or f"syn-{seed}-{kind}", tuple(tracks), area,
                 window.t_obs, window.t_pred, window.hz)
