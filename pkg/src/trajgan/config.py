"""Experiment configuration: typed sections and an INI round-trip.

Every tunable lives here with its default. ``ExperimentConfig.loads`` rejects
unknown sections and keys; ``dumps`` writes every value back so that
parse -> serialize -> parse is the identity.
"""
from __future__ import annotations

import configparser
import dataclasses
import io
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError


@dataclass(frozen=True)
class WindowConfig:
    t_obs: int = 20
    t_pred: int = 30
    hz: float = 10.0

    @property
    def total(self) -> int:
        return self.t_obs + self.t_pred

    @property
    def pred_seconds(self) -> float:
        return self.t_pred / self.hz


@dataclass(frozen=True)
class TargetConfig:
    num_points: int = 32
    decay: float = 0.9
    rho: float = 0.2
    phi_max_deg: float = 30.0
    crop_distance: float = 40.0
    stationary_radius: float = 2.0
    stationary_speed: float = 0.25
    max_attempts: int = 2000

    @property
    def phi_max(self) -> float:
        return math.radians(self.phi_max_deg)


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 16
    hidden_dim: int = 32
    heads: int = 4
    noise_dim: int = 8
    point_scale: float = 10.0


@dataclass(frozen=True)
class LossWeights:
    gan: float = 1.4
    ade: float = 1.0
    fde: float = 1.5


@dataclass(frozen=True)
class AugmentConfig:
    enabled: bool = True
    noise_sigma: float = 0.25
    rotate: bool = True
    drop_prob: float = 0.1
    noise_all_tracks: bool = True


@dataclass(frozen=True)
class RansacConfig:
    tolerance: float = 2.0
    max_trials: int = 30
    min_samples: float = 0.6
    curve_run_fraction: float = 0.2


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 150
    lr: float = 0.001
    batch: int = 64
    scheduler_factor: float = 0.5
    plateau_window: int = 5000
    smoothing: float = 0.3
    eval_interval: int = 250
    val_fraction: float = 0.1
    straight_fraction: float = 0.3
    class_balance: bool = True
    dis_input: str = "random"
    max_iterations: int = 0


@dataclass(frozen=True)
class SeedConfig:
    data: int = 0
    train: int = 0
    eval: int = 1234


@dataclass(frozen=True)
class PathConfig:
    corpus_dir: str = "corpus"
    map_file: str = ""
    out_dir: str = "out"


@dataclass(frozen=True)
class ExperimentConfig:
    window: WindowConfig = field(default_factory=WindowConfig)
    target_points: TargetConfig = field(default_factory=TargetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    ransac: RansacConfig = field(default_factory=RansacConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    seeds: SeedConfig = field(default_factory=SeedConfig)
    paths: PathConfig = field(default_factory=PathConfig)

    def __post_init__(self):
        _validate(self)

    def replace(self, **sections) -> "ExperimentConfig":
        return dataclasses.replace(self, **sections)

    def with_values(self, section: str, **values) -> "ExperimentConfig":
        return dataclasses.replace(self, **{section: dataclasses.replace(getattr(self, section), **values)})

    def dumps(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        for sec in fields(self):
            obj = getattr(self, sec.name)
            parser[sec.name] = {f.name: _fmt(getattr(obj, f.name)) for f in fields(obj)}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config: {exc}") from None
        sections = {f.name: f for f in fields(cls)}
        unknown = [s for s in parser.sections() if s not in sections]
        if unknown:
            raise ConfigError(f"unknown config section(s): {unknown}")
        kwargs = {}
        for name, sec in sections.items():
            default = sec.default_factory()
            if not parser.has_section(name):
                kwargs[name] = default
                continue
            types = {f.name: type(getattr(default, f.name)) for f in fields(default)}
            values = {}
            for key, raw in parser[name].items():
                if key not in types:
                    raise ConfigError(f"unknown key {key!r} in section [{name}]")
                values[key] = _parse(types[key], raw, f"{name}.{key}")
            kwargs[name] = dataclasses.replace(default, **values)
        return cls(**kwargs)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        return cls.loads(path.read_text(encoding="utf-8"))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(typ, raw: str, where: str):
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {typ.__name__}") from None


def _validate(cfg: ExperimentConfig):
    w, tp, m, tr = cfg.window, cfg.target_points, cfg.model, cfg.train
    checks = [
        (w.t_obs >= 2, "window.t_obs must be >= 2"),
        (w.t_pred >= 1, "window.t_pred must be >= 1"),
        (w.hz > 0, "window.hz must be positive"),
        (tp.num_points >= 1, "target_points.num_points must be >= 1"),
        (0 < tp.decay <= 1, "target_points.decay must lie in (0, 1]"),
        (0 <= tp.rho < 1, "target_points.rho must lie in [0, 1)"),
        (0 <= tp.phi_max_deg <= 180, "target_points.phi_max_deg must lie in [0, 180]"),
        (tp.crop_distance > 0, "target_points.crop_distance must be positive"),
        (m.hidden_dim % m.heads == 0, "model.hidden_dim must be divisible by model.heads"),
        (min(m.embed_dim, m.hidden_dim, m.heads, m.noise_dim) >= 1, "model dims must be >= 1"),
        (min(cfg.loss.gan, cfg.loss.ade, cfg.loss.fde) >= 0, "loss weights must be >= 0"),
        (cfg.augment.noise_sigma >= 0, "augment.noise_sigma must be >= 0"),
        (0 <= cfg.augment.drop_prob < 1, "augment.drop_prob must lie in [0, 1)"),
        (cfg.ransac.tolerance > 0 and cfg.ransac.max_trials >= 1, "ransac settings invalid"),
        (0 < cfg.ransac.min_samples <= 1, "ransac.min_samples must lie in (0, 1]"),
        (tr.epochs >= 1 and tr.batch >= 1 and tr.lr > 0, "train epochs/batch/lr must be positive"),
        (0 < tr.scheduler_factor < 1, "train.scheduler_factor must lie in (0, 1)"),
        (tr.plateau_window >= 1 and tr.eval_interval >= 1, "train intervals must be positive"),
        (0 <= tr.val_fraction < 1, "train.val_fraction must lie in [0, 1)"),
        (0 <= tr.straight_fraction <= 1, "train.straight_fraction must lie in [0, 1]"),
        (tr.dis_input in ("random", "both"), "train.dis_input must be 'random' or 'both'"),
        (tr.max_iterations >= 0, "train.max_iterations must be >= 0"),
    ]
    for ok, msg in checks:
        if not ok:
            raise ConfigError(msg)
