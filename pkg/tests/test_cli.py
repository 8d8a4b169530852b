import csv
import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from trajgan.cli import main
from trajgan.config import ExperimentConfig, WindowConfig
from trajgan.corpus import read_corpus
from trajgan.gan import zero_gan
from trajgan.persistence import save_model
from trajgan.preprocess import classify_curvature
from trajgan.scene import AgentTrack, DrivableArea, Role, Scene, save_map, write_scene_csv

from .conftest import big_square

SVG = "{http://www.w3.org/2000/svg}"


def files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    assert main(["gen-data", "--n", "12", "--mix", "0.5", "--seed", "4", "--out", str(out)]) == 0
    return out


@pytest.fixture
def zero_ckpt(tmp_path):
    path = tmp_path / "zero.tgf"
    save_model(path, zero_gan(), WindowConfig())
    return path


def stationary_scene(tmp_path):
    pos = np.array([12.5, -3.0])
    agent = AgentTrack("a", Role.AGENT, np.arange(50), np.tile(pos, (50, 1)))
    other = AgentTrack("o", Role.OTHER, np.arange(50),
                       np.column_stack([np.linspace(-40, 40, 50), np.full(50, 4.0)]))
    area = DrivableArea([big_square(200.0)])
    scene = Scene("parked", (agent, other), area)
    write_scene_csv(scene, tmp_path / "parked.csv")
    save_map(area, tmp_path / "map.json")
    return scene


# ---------------------------------------------------------------- gen-data


def test_gen_data_layout_and_labels(corpus_dir):
    rows = read_rows(corpus_dir / "manifest.csv")
    assert len(rows) == 12 and len(list((corpus_dir / "scenes").glob("*.csv"))) == 12
    labels = [r["label"] for r in rows]
    assert labels.count("straight") == 6 and labels.count("curve") == 6
    # regenerate labels with the classifier and compare with the manifest
    corpus = read_corpus(corpus_dir, WindowConfig())
    ransac = [classify_curvature(s.agent.xy, np.random.default_rng(0)).label for s in corpus.scenes]
    assert np.mean([a == b for a, b in zip(ransac, labels)]) >= 0.9


def test_gen_data_zero(tmp_path):
    assert main(["gen-data", "--n", "0", "--out", str(tmp_path / "c")]) == 0
    rows = read_rows(tmp_path / "c" / "manifest.csv")
    assert rows == []


def test_gen_data_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["gen-data", "--n", "5", "--seed", "11", "--out", str(tmp_path / name)]) == 0
    assert files(tmp_path / "a") == files(tmp_path / "b")


def test_gen_data_bad_mix(tmp_path):
    assert main(["gen-data", "--mix", "1.5", "--out", str(tmp_path)]) == 1


# ---------------------------------------------------------------- predict / plot


def test_predict_zero_checkpoint_stationary(tmp_path, zero_ckpt):
    scene = stationary_scene(tmp_path)
    out = tmp_path / "out"
    code = main(["predict", "--checkpoint", str(zero_ckpt), "--scene", str(tmp_path / "parked.csv"),
                 "--map", str(tmp_path / "map.json"), "--svg", "--out", str(out)])
    assert code == 0
    rows = read_rows(out / "parked_prediction.csv")
    assert len(rows) == 30
    assert [int(r["frame"]) for r in rows] == list(range(20, 50))
    assert {(float(r["x"]), float(r["y"])) for r in rows} == {tuple(scene.last_observed())}

    root = ET.parse(out / "parked.svg").getroot()
    tracks = [e for e in root.iter(f"{SVG}polyline") if "track" in e.get("class", "").split()]
    goals = [e for e in root.iter(f"{SVG}circle") if e.get("class") == "goal-point"]
    assert len(tracks) == len(scene.tracks) and len(goals) == 32
    assert sum(1 for e in root.iter(f"{SVG}polyline") if e.get("class") == "prediction") == 1


def test_predict_missing_map_names_path(tmp_path, zero_ckpt, capsys):
    stationary_scene(tmp_path)
    missing = tmp_path / "no_such_map.json"
    code = main(["predict", "--checkpoint", str(zero_ckpt), "--scene", str(tmp_path / "parked.csv"),
                 "--map", str(missing), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "no_such_map.json" in capsys.readouterr().err


def test_predict_window_mismatch(tmp_path, zero_ckpt):
    stationary_scene(tmp_path)
    cfg = ExperimentConfig().with_values("window", t_obs=10, t_pred=40)
    cfg.save(tmp_path / "c.ini")
    code = main(["predict", "--checkpoint", str(zero_ckpt), "--scene", str(tmp_path / "parked.csv"),
                 "--map", str(tmp_path / "map.json"), "--config", str(tmp_path / "c.ini"),
                 "--out", str(tmp_path / "o")])
    assert code == 1


def test_plot_deterministic(tmp_path, corpus_dir):
    scene = corpus_dir / "scenes" / "scene-00003.csv"
    outs = []
    for name in ("a", "b"):
        assert main(["plot", "--scene", str(scene), "--map", str(corpus_dir / "map.json"),
                     "--out", str(tmp_path / name)]) == 0
        outs.append((tmp_path / name / "scene-00003.svg").read_bytes())
    assert outs[0] == outs[1]
    ET.fromstring(outs[0])


# ---------------------------------------------------------------- evaluate / train


def test_evaluate_outputs(tmp_path, corpus_dir, zero_ckpt):
    out = tmp_path / "ev"
    assert main(["evaluate", "--checkpoint", str(zero_ckpt), "--corpus", str(corpus_dir), "--out", str(out)]) == 0
    assert {"report.csv", "report.json", "baseline.csv", "baseline.json", "boxplot_ade.svg",
            "boxplot_fde.svg"} <= set(files(out))
    rows = read_rows(out / "report.csv")
    doc = json.loads((out / "report.json").read_text())
    fdes = sorted(float(r["fde"]) for r in rows)
    assert doc["aggregates"]["all"]["fde"]["median"] == pytest.approx(float(np.median(fdes)), abs=1e-12)
    boxes = ET.parse(out / "boxplot_fde.svg").getroot()
    assert sum(1 for e in boxes.iter(f"{SVG}g") if e.get("class") == "box") == 4


def test_evaluate_straight_only(tmp_path, zero_ckpt):
    corpus = tmp_path / "straight"
    assert main(["gen-data", "--n", "4", "--mix", "1.0", "--out", str(corpus)]) == 0
    out = tmp_path / "ev"
    assert main(["evaluate", "--checkpoint", str(zero_ckpt), "--corpus", str(corpus), "--out", str(out)]) == 0
    doc = json.loads((out / "report.json").read_text())
    assert "curve" not in doc["aggregates"] and any("curve" in n for n in doc["notes"])


def test_evaluate_empty_corpus(tmp_path, zero_ckpt):
    corpus = tmp_path / "empty"
    assert main(["gen-data", "--n", "0", "--out", str(corpus)]) == 0
    assert main(["evaluate", "--checkpoint", str(zero_ckpt), "--corpus", str(corpus),
                 "--out", str(tmp_path / "o")]) != 0


def test_train_writes_artifacts_deterministically(tmp_path, corpus_dir):
    cfg = ExperimentConfig().with_values("train", batch=4, max_iterations=4, eval_interval=2)
    cfg.save(tmp_path / "c.ini")
    for name in ("a", "b"):
        assert main(["train", "--corpus", str(corpus_dir), "--config", str(tmp_path / "c.ini"),
                     "--out", str(tmp_path / name)]) == 0
    a, b = files(tmp_path / "a"), files(tmp_path / "b")
    assert set(a) == {"checkpoint.tgf", "metrics.csv", "config.ini"}
    assert a == b
    assert ExperimentConfig.loads(a["config.ini"].decode()) == cfg


# ---------------------------------------------------------------- exit codes


def test_usage_error_exit_code():
    proc = subprocess.run([sys.executable, "-m", "trajgan.cli", "bogus"], capture_output=True, text=True)
    assert proc.returncode == 1


def test_bad_config_exit_code(tmp_path):
    (tmp_path / "bad.ini").write_text("[train]\nwarp = 9\n")
    assert main(["gen-data", "--n", "1", "--config", str(tmp_path / "bad.ini"), "--out", str(tmp_path)]) == 1


def test_bad_log_level(tmp_path, monkeypatch):
    monkeypatch.setenv("TRAJGAN_LOG", "loud")
    assert main(["gen-data", "--n", "0", "--out", str(tmp_path)]) == 1


def test_numeric_abort_exit_code(tmp_path, corpus_dir):
    cfg = ExperimentConfig().with_values("train", batch=4, max_iterations=4, eval_interval=2, lr=1e300)
    cfg.save(tmp_path / "c.ini")
    with np.errstate(all="ignore"):
        code = main(["train", "--corpus", str(corpus_dir), "--config", str(tmp_path / "c.ini"),
                     "--out", str(tmp_path / "o")])
    assert code == 3
