"""End-to-end acceptance checks, one test per numbered criterion.

Each test prints a PASS/FAIL line on stdout and the session summary lists all
of them (see ``conftest.py``). Criteria 7 and 8 train real models and take a
few minutes on one core.
"""
import hashlib
import math
import time

import numpy as np
import pytest

from trajgan.autodiff import Linear, LstmCellParams, MultiHeadSelfAttention, Tensor, no_grad, ops
from trajgan.autodiff.gradcheck import check_gradients
from trajgan.autodiff.nn import lstm_sequence
from trajgan.cli import main
from trajgan.config import ExperimentConfig, LossWeights, ModelConfig, TargetConfig, WindowConfig
from trajgan.corpus import generate_corpus
from trajgan.evaluation import evaluate, evaluate_baseline
from trajgan.features import Batch
from trajgan.gan import TrajGAN, discriminate, full_deltas, generator_loss
from trajgan.metrics import ade, fde
from trajgan.persistence import load_model, save_model
from trajgan.preprocess import CURVE, STRAIGHT, BalancedSampler, classify_curvature
from trajgan.scene import SCENE_KINDS, DrivableArea, construction_label, generate_synthetic_scene
from trajgan.social import SocialEncoder, social_forward
from trajgan.target_points import DynamicState, estimate_dynamics, extract_target_points, sample_target_points
from trajgan.training import PlateauScheduler, train

from .conftest import big_square

H, T_PRED, N_AGENTS = 4, 3, 3
MINI = ModelConfig(embed_dim=3, hidden_dim=H, heads=2, noise_dim=2)


def report(number, ok, detail):
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


def randomized(module, rng, scale=0.5):
    for p in module.parameters():
        p.data[...] = rng.normal(0, scale, p.shape)
    return module


# ---------------------------------------------------------------- 1


@pytest.mark.acceptance(1, "gradient suite, rel. err < 1e-5, under 60 s")
def test_criterion_01_gradients():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    errors = {}

    lin = randomized(Linear(3, H, rng), rng)
    x = Tensor(rng.normal(size=(N_AGENTS, 3)), requires_grad=True)
    proj = rng.normal(size=(N_AGENTS, H))
    errors["linear"] = check_gradients(lambda: ops.sum(ops.mul(lin(x), proj)),
                                       dict(lin.named_parameters(), x=x))

    cell = randomized(LstmCellParams.init(3, H, rng), rng)
    seq = Tensor(rng.normal(size=(N_AGENTS, 4, 3)), requires_grad=True)
    proj = rng.normal(size=(N_AGENTS, 4, H))
    errors["lstm"] = check_gradients(lambda: ops.sum(ops.mul(lstm_sequence(cell, seq), proj)),
                                     dict(cell.named_parameters(), x=seq))

    att = randomized(MultiHeadSelfAttention(H, 2, rng), rng)
    hid = Tensor(rng.normal(size=(N_AGENTS, H)), requires_grad=True)
    proj = rng.normal(size=(N_AGENTS, H))
    errors["mhsa"] = check_gradients(lambda: ops.sum(ops.mul(att(hid)[0], proj)),
                                     dict(att.named_parameters(), h=hid))

    model = randomized(TrajGAN(MINI, rng), rng)
    obs = rng.normal(size=(2 * N_AGENTS, 4, 2))
    batch = Batch(obs, np.repeat([0, 1], N_AGENTS), np.array([0, N_AGENTS]), rng.normal(0, 10, (2, 5, 2)),
                  obs[[0, N_AGENTS]], rng.normal(0, 3, (2, T_PRED, 2)))
    z = rng.normal(size=(2, MINI.noise_dim))
    proj = rng.normal(size=(2, T_PRED, 2))
    errors["generator"] = check_gradients(lambda: ops.sum(ops.mul(model.gen(batch, z, T_PRED), proj)),
                                          model.gen.named_parameters())

    traj = rng.normal(size=(3, 6, 2))
    labels = np.array([1.0, 0.0, 1.0])
    errors["discriminator"] = check_gradients(
        lambda: ops.mean(ops.bce(discriminate(model.dis, traj), labels)), model.dis.named_parameters())

    def objective():
        pred = model.gen(batch, z, T_PRED)
        return generator_loss(LossWeights(), model.dis(full_deltas(batch.obs_deltas, pred)), pred, batch.future)

    errors["full loss"] = check_gradients(objective, model.named_parameters())

    elapsed = time.perf_counter() - start
    worst = {k: max(v.values()) for k, v in errors.items()}
    ok = all(e < 1e-5 for e in worst.values()) and elapsed < 60
    report(1, ok, f"worst {max(worst.values()):.2e} in {elapsed:.1f} s; "
           + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


# ---------------------------------------------------------------- 2


@pytest.mark.acceptance(2, "ADE/FDE oracle on 1000 pairs; (3,4) offset gives 5.0")
def test_criterion_02_metrics():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        t = int(rng.integers(1, 60))
        p, y = rng.normal(0, 30, (t, 2)), rng.normal(0, 30, (t, 2))
        per = [math.sqrt((p[i, 0] - y[i, 0]) ** 2 + (p[i, 1] - y[i, 1]) ** 2) for i in range(t)]
        worst = max(worst, abs(ade(p, y) - math.fsum(per) / t), abs(fde(p, y) - per[-1]))
    y = rng.normal(size=(30, 2))
    offset = (ade(y + [3.0, 4.0], y), fde(y + [3.0, 4.0], y))
    report(2, worst <= 1e-12 and offset == (5.0, 5.0), f"max deviation {worst:.1e}, offset case {offset}")


# ---------------------------------------------------------------- 3


@pytest.mark.acceptance(3, "attention permutation invariance on 200 scenes; N from 1 to 64")
def test_criterion_03_attention():
    enc = SocialEncoder(ModelConfig(), np.random.default_rng(0))
    rng = np.random.default_rng(3)
    worst = 0.0
    for i in range(200):
        scene = generate_synthetic_scene(10_000 + i, SCENE_KINDS[i % 4])
        others = [t for t in scene.tracks if t is not scene.agent]
        shuffled = [others[k] for k in rng.permutation(len(others))]
        permuted = scene.replace(tracks=(scene.agent, *shuffled))
        with no_grad():
            a = social_forward(enc, scene).target_context.data
            b = social_forward(enc, permuted).target_context.data
        worst = max(worst, float(np.abs(a - b).max()))
    shapes = []
    for n in range(1, 65):
        with no_grad():
            rows, _ = enc(rng.normal(size=(n, 19, 2)))
        shapes.append(rows.shape == (n, 32))
    report(3, worst < 1e-12 and all(shapes), f"max target-context change {worst:.1e}; N=1..64 ok={all(shapes)}")


# ---------------------------------------------------------------- 4


@pytest.mark.acceptance(4, "target points inside drivable area on 10^4 scenes; degenerate sector; stationary disc")
def test_criterion_04_target_points():
    outside = total = 0
    for i in range(10_000):
        scene = generate_synthetic_scene(20_000 + i, SCENE_KINDS[i % 4])
        _, tps = extract_target_points(scene, np.random.default_rng(i))
        inside = scene.map_ref.contains_many(tps.global_points())
        outside += int((~inside).sum())
        total += tps.count
    area = DrivableArea([big_square()])
    rng = np.random.default_rng(0)
    degenerate = sample_target_points(DynamicState(10.0, 0.3, np.array([4.0, 2.0])), area, 32, 3.0, rng,
                                      TargetConfig(rho=0.0, phi_max_deg=0.0))
    cv_ok = bool(np.array_equal(degenerate.points, np.tile([30.0, 0.0], (32, 1))))
    still = estimate_dynamics(np.tile([1.0, 1.0], (20, 1)))
    radius = float(np.hypot(*sample_target_points(still, area, 32, 3.0, rng).points.T).max())
    report(4, outside == 0 and cv_ok and radius <= 2.0,
           f"{outside}/{total} points outside; CV point exact={cv_ok}; stationary max radius {radius:.2f} m")


# ---------------------------------------------------------------- 5


@pytest.mark.acceptance(5, "every batch of 64 holds 19 straight / 45 curve")
def test_criterion_05_sampler():
    corpus = generate_corpus(500, 0.3, 5, ExperimentConfig())
    labels = np.array(corpus.labels)
    sampler = BalancedSampler(list(labels), 64, np.random.default_rng(0))
    counts = set()
    for _ in range(150 * 8):
        idx = sampler.next_batch()
        counts.add((int((labels[idx] == STRAIGHT).sum()), int((labels[idx] == CURVE).sum())))
    report(5, counts == {(19, 45)}, f"observed splits {sorted(counts)} over 1200 batches")


# ---------------------------------------------------------------- 6


@pytest.mark.acceptance(6, "RANSAC accuracy >= 95% on 1000 labelled scenes")
def test_criterion_06_ransac():
    hits = 0
    for i in range(1000):
        kind = SCENE_KINDS[i % 4]
        scene = generate_synthetic_scene(30_000 + i, kind)
        hits += classify_curvature(scene.agent.xy, np.random.default_rng(i)).label == construction_label(kind)
    report(6, hits >= 950, f"accuracy {hits / 10:.1f}%")


# ---------------------------------------------------------------- 7


@pytest.mark.acceptance(7, "single-scene overfit: ADE < 0.1 m within 2000 iterations, under 5 min")
def test_criterion_07_overfit():
    cfg = (ExperimentConfig()
           .with_values("train", max_iterations=2000, batch=16, class_balance=False, eval_interval=100)
           .with_values("augment", enabled=False))
    scene = generate_synthetic_scene(7, "curve")
    start = time.perf_counter()
    result = train(cfg, [scene])
    elapsed = time.perf_counter() - start
    report(7, result.best_val_ade < 0.1 and elapsed < 300,
           f"best ADE {result.best_val_ade:.3f} m at iteration {result.best_iteration}, {elapsed:.0f} s")


# ---------------------------------------------------------------- 8


@pytest.mark.acceptance(8, "desk-scale model beats CV curve-class mean FDE by >= 30%")
def test_criterion_08_desk_scale():
    cfg = ExperimentConfig()
    start = time.perf_counter()
    train_set = generate_corpus(500, 0.3, 0, cfg)
    test_set = generate_corpus(200, 0.3, 1, cfg)
    result = train(cfg, train_set.scenes, train_set.labels)
    model = result.best_model()
    ours = evaluate(model, test_set.scenes, cfg, test_set.labels).aggregates[CURVE]["fde"]["mean"]
    cv = evaluate_baseline(test_set.scenes, cfg, test_set.labels).aggregates[CURVE]["fde"]["mean"]
    elapsed = time.perf_counter() - start
    gain = 1.0 - ours / cv
    report(8, gain >= 0.30 and elapsed < 1800,
           f"curve FDE model {ours:.2f} m vs CV {cv:.2f} m ({gain:.0%} better), "
           f"{result.iterations} iterations in {elapsed:.0f} s")


# ---------------------------------------------------------------- 9


@pytest.mark.acceptance(9, "plateau halvings exactly at 5000-iteration boundaries; lr never rises")
def test_criterion_09_scheduler():
    sched = PlateauScheduler(0.001, 0.5, 5000)
    # a validation metric that never improves: flat, then slowly worsening
    stream = [sched.observe(it, 3.0 + 1e-4 * max(0, it - 10_000)) for it in range(250, 20_001, 250)]
    monotone = all(b <= a for a, b in zip(stream, stream[1:]))
    report(9, sched.decays == [5000, 10_000, 15_000, 20_000] and monotone and stream[-1] == 0.001 / 16,
           f"decays at {sched.decays}, final lr {stream[-1]}")


# ---------------------------------------------------------------- 10


def _digests(root):
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.mark.acceptance(10, "byte-identical metrics logs, checkpoints and SVGs across two runs")
def test_criterion_10_determinism(tmp_path):
    cfg = ExperimentConfig().with_values("train", batch=8, max_iterations=20, eval_interval=5)
    cfg.save(tmp_path / "c.ini")
    runs = []
    for name in ("a", "b"):
        root = tmp_path / name
        assert main(["gen-data", "--n", "16", "--seed", "2", "--out", str(root / "corpus")]) == 0
        assert main(["train", "--corpus", str(root / "corpus"), "--config", str(tmp_path / "c.ini"),
                     "--out", str(root / "run")]) == 0
        assert main(["plot", "--scene", str(root / "corpus" / "scenes" / "scene-00001.csv"),
                     "--map", str(root / "corpus" / "map.json"), "--checkpoint",
                     str(root / "run" / "checkpoint.tgf"), "--out", str(root / "plot")]) == 0
        runs.append(_digests(root))
    same = runs[0] == runs[1]
    report(10, same and "run/metrics.csv" in runs[0] and "plot/scene-00001.svg" in runs[0],
           f"{len(runs[0])} artifacts compared, identical={same}")


# ---------------------------------------------------------------- 11


@pytest.mark.acceptance(11, "save, load, evaluate reproduces the EvalReport bytes")
def test_criterion_11_checkpoint_roundtrip(tmp_path):
    cfg = ExperimentConfig()
    corpus = generate_corpus(24, 0.3, 9, cfg)
    model = TrajGAN(cfg.model, np.random.default_rng(11))
    direct = evaluate(model, corpus.scenes, cfg, corpus.labels)
    save_model(tmp_path / "m.tgf", model, WindowConfig())
    loaded, window = load_model(tmp_path / "m.tgf")
    again = evaluate(loaded, corpus.scenes, cfg, corpus.labels)
    same = (direct.to_csv() == again.to_csv()) and (direct.to_json() == again.to_json())
    report(11, same and window == WindowConfig(), f"report bytes identical={same}")
