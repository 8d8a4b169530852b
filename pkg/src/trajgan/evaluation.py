"""K=1 prediction, per-scene metrics and class-stratified summaries."""
from __future__ import annotations

import csv
import io
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import no_grad
from .config import ExperimentConfig
from .errors import ContractError
from .features import SceneFeatures, collate, prepare_scene
from .gan import TrajGAN
from .metrics import ade, constant_velocity_baseline, fde
from .preprocess import CURVE, STRAIGHT, classify_curvature
from .scene import Scene

CLASSES = (STRAIGHT, CURVE)
REFERENCE = {"ade": 1.67, "fde": 3.82,
             "note": "published full-benchmark figures; not reproducible with desk-scale synthetic data"}
CHUNK = 64


def scene_seed(scene_id: str) -> int:
    return zlib.crc32(scene_id.encode("utf-8"))


def scene_rng(base_seed: int, scene_id: str) -> np.random.Generator:
    return np.random.default_rng([base_seed, scene_seed(scene_id)])


def label_scene(scene: Scene, config: ExperimentConfig = ExperimentConfig()) -> str:
    rng = scene_rng(config.seeds.data, scene.scene_id)
    full = scene.agent.filled(0, scene.t_obs + scene.t_pred)
    return classify_curvature(full, rng, config.ransac).label


def eval_inputs(scene: Scene, config: ExperimentConfig) -> tuple[SceneFeatures, np.ndarray]:
    """Target points and the single noise draw used for a scene's K=1 prediction."""
    rng = scene_rng(config.seeds.eval, scene.scene_id)
    feats = prepare_scene(scene, rng, config)
    return feats, rng.standard_normal(config.model.noise_dim)


def predict_local(model: TrajGAN, feats: list[SceneFeatures], zs: np.ndarray, t_pred: int) -> np.ndarray:
    out = []
    with no_grad():
        for s in range(0, len(feats), CHUNK):
            batch = collate(feats[s:s + CHUNK])
            out.append(model.gen(batch, zs[s:s + CHUNK], t_pred).data)
    return np.concatenate(out) if out else np.zeros((0, t_pred, 2))


def predict_scenes(model: TrajGAN, scenes: list[Scene],
                   config: ExperimentConfig = ExperimentConfig()) -> tuple[list[np.ndarray], list[SceneFeatures]]:
    """Global-frame predictions [t_pred, 2] per scene."""
    if not scenes:
        return [], []
    pairs = [eval_inputs(s, config) for s in scenes]
    feats = [f for f, _ in pairs]
    local = predict_local(model, feats, np.stack([z for _, z in pairs]), scenes[0].t_pred)
    return [f.to_global(p) for f, p in zip(feats, local)], feats


def _summary(values: np.ndarray) -> dict:
    q1, med, q3 = np.percentile(values, [25, 50, 75])
    return {"count": int(len(values)), "mean": float(values.mean()), "q1": float(q1),
            "median": float(med), "q3": float(q3)}


@dataclass
class EvalReport:
    rows: list[tuple[str, str, float, float]]
    method: str = "model"
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        present = {r[1] for r in self.rows}
        for cls in CLASSES:
            if cls not in present:
                msg = f"class '{cls}' absent from the corpus; its aggregate is omitted"
                if msg not in self.notes:
                    self.notes.append(msg)

    def values(self, metric: str, cls: str | None = None) -> np.ndarray:
        col = {"ade": 2, "fde": 3}[metric]
        return np.array([r[col] for r in self.rows if cls is None or r[1] == cls], dtype=np.float64)

    @property
    def aggregates(self) -> dict:
        out = {}
        for cls in CLASSES + ("all",):
            key = None if cls == "all" else cls
            a = self.values("ade", key)
            if len(a) == 0:
                continue
            out[cls] = {"ade": _summary(a), "fde": _summary(self.values("fde", key))}
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("scene_id", "label", "ade", "fde"))
        for sid, label, a, f in self.rows:
            w.writerow((sid, label, repr(float(a)), repr(float(f))))
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {"method": self.method, "aggregates": self.aggregates, "notes": self.notes,
               "reference": REFERENCE}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_csv(cls, text: str, method: str = "model") -> "EvalReport":
        reader = csv.DictReader(io.StringIO(text))
        rows = [(r["scene_id"], r["label"], float(r["ade"]), float(r["fde"])) for r in reader]
        return cls(rows, method)

    def write(self, out_dir, stem: str = "report") -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        c, j = out / f"{stem}.csv", out / f"{stem}.json"
        c.write_text(self.to_csv(), encoding="utf-8")
        j.write_text(self.to_json(), encoding="utf-8")
        return c, j


def report_from_predictions(scenes: list[Scene], preds: list[np.ndarray], labels: list[str],
                            method: str) -> EvalReport:
    rows = []
    for scene, pred, label in zip(scenes, preds, labels):
        truth = scene.agent_future()
        rows.append((scene.scene_id, label, ade(pred, truth), fde(pred, truth)))
    return EvalReport(rows, method)


def _labels(scenes, labels, config):
    if labels is None:
        return [label_scene(s, config) for s in scenes]
    if len(labels) != len(scenes):
        raise ContractError("labels and scenes differ in length")
    return list(labels)


def evaluate(model: TrajGAN, scenes: list[Scene], config: ExperimentConfig = ExperimentConfig(),
             labels: list[str] | None = None) -> EvalReport:
    if not scenes:
        raise ContractError("evaluate: empty corpus")
    preds, _ = predict_scenes(model, scenes, config)
    return report_from_predictions(scenes, preds, _labels(scenes, labels, config), "model")


def evaluate_baseline(scenes: list[Scene], config: ExperimentConfig = ExperimentConfig(),
                      labels: list[str] | None = None) -> EvalReport:
    if not scenes:
        raise ContractError("evaluate: empty corpus")
    preds = [constant_velocity_baseline(s) for s in scenes]
    return report_from_predictions(scenes, preds, _labels(scenes, labels, config), "constant_velocity")
