"""On-disk corpora: one CSV per scene, a single shared map JSON and a manifest.

Synthetic scenes are laid out on a grid so that their roads never overlap in
the shared map.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, WindowConfig
from .errors import MalformedSceneError
from .evaluation import label_scene
from .scene import (
    CURVE_KINDS,
    STRAIGHT_KINDS,
    DrivableArea,
    Scene,
    generate_synthetic_scene,
    load_map,
    read_scene_csv,
    save_map,
    write_scene_csv,
)

MAP_NAME = "map.json"
MANIFEST_NAME = "manifest.csv"
SCENE_DIR = "scenes"
GRID_SPACING = 400.0
GRID_COLUMNS = 32


@dataclass
class Corpus:
    scenes: list[Scene]
    area: DrivableArea
    kinds: list[str]
    labels: list[str]

    def __len__(self):
        return len(self.scenes)


def corpus_kinds(n: int, mix: float, seed: int) -> list[str]:
    """round(mix * n) straight-class scenes (half-up), the rest curved; order shuffled."""
    n_straight = int(math.floor(mix * n + 0.5))
    kinds = [STRAIGHT_KINDS[i % 2] for i in range(n_straight)]
    kinds += [CURVE_KINDS[i % 2] for i in range(n - n_straight)]
    order = np.random.default_rng([seed, 7]).permutation(n)
    return [kinds[i] for i in order]


def _offset(i: int) -> np.ndarray:
    return np.array([(i % GRID_COLUMNS) * GRID_SPACING, (i // GRID_COLUMNS) * GRID_SPACING])


def generate_corpus(n: int, mix: float, seed: int, config: ExperimentConfig = ExperimentConfig()) -> Corpus:
    window = config.window
    kinds = corpus_kinds(n, mix, seed)
    placed = []
    polygons = []
    for i, kind in enumerate(kinds):
        s = generate_synthetic_scene(seed * 1_000_003 + i, kind, window, scene_id=f"scene-{i:05d}")
        off = _offset(i)
        tracks = tuple(t.transformed(t.xy + off) for t in s.tracks)
        polygons.extend(p + off for p in s.map_ref.polygons)
        placed.append((s.scene_id, tracks))
    area = DrivableArea(polygons)
    scenes = [Scene(sid, tracks, area, window.t_obs, window.t_pred, window.hz) for sid, tracks in placed]
    labels = [label_scene(s, config) for s in scenes]
    return Corpus(scenes, area, kinds, labels)


def write_corpus(out_dir, corpus: Corpus) -> Path:
    out = Path(out_dir)
    (out / SCENE_DIR).mkdir(parents=True, exist_ok=True)
    save_map(corpus.area, out / MAP_NAME)
    rows = []
    for scene, kind, label in zip(corpus.scenes, corpus.kinds, corpus.labels):
        rel = f"{SCENE_DIR}/{scene.scene_id}.csv"
        write_scene_csv(scene, out / rel)
        rows.append((scene.scene_id, rel, kind, label))
    with (out / MANIFEST_NAME).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("scene_id", "file", "kind", "label"))
        w.writerows(rows)
    return out


def read_corpus(corpus_dir, window: WindowConfig = WindowConfig(), map_path=None,
                require_future: bool = True) -> Corpus:
    """Load a corpus written by ``write_corpus``; without a manifest every CSV under
    the directory is read and kinds/labels are left empty."""
    root = Path(corpus_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {root}")
    area = load_map(Path(map_path) if map_path else root / MAP_NAME)
    manifest = root / MANIFEST_NAME
    scenes, kinds, labels = [], [], []
    if manifest.exists():
        with manifest.open(newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                path = root / row["file"]
                if not path.exists():
                    raise MalformedSceneError(f"manifest lists a missing scene file: {path}")
                scenes.append(read_scene_csv(path, area, window, require_future))
                kinds.append(row.get("kind", ""))
                labels.append(row.get("label", ""))
    else:
        for path in sorted(root.rglob("*.csv")):
            scenes.append(read_scene_csv(path, area, window, require_future))
    return Corpus(scenes, area, kinds, labels)
