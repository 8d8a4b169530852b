import dataclasses

import pytest
from hypothesis import given
from hypothesis import strategies as st

from trajgan.config import ExperimentConfig
from trajgan.errors import ConfigError


def test_defaults():
    cfg = ExperimentConfig()
    assert (cfg.window.t_obs, cfg.window.t_pred, cfg.window.hz) == (20, 30, 10.0)
    assert cfg.target_points.num_points == 32
    assert (cfg.model.embed_dim, cfg.model.hidden_dim) == (16, 32)
    assert (cfg.loss.gan, cfg.loss.ade, cfg.loss.fde) == (1.4, 1.0, 1.5)
    tr = cfg.train
    assert (tr.epochs, tr.lr, tr.batch, tr.scheduler_factor, tr.plateau_window) == (150, 0.001, 64, 0.5, 5000)


def test_roundtrip_default(tmp_path):
    cfg = ExperimentConfig()
    cfg.save(tmp_path / "c.ini")
    assert ExperimentConfig.load(tmp_path / "c.ini") == cfg
    assert ExperimentConfig.loads(cfg.dumps()).dumps() == cfg.dumps()


@given(lr=st.floats(1e-6, 1.0), batch=st.integers(1, 512), sigma=st.floats(0.0, 3.0),
       balance=st.booleans(), seed=st.integers(0, 2**31))
def test_roundtrip_property(lr, batch, sigma, balance, seed):
    cfg = (ExperimentConfig().with_values("train", lr=lr, batch=batch, class_balance=balance)
           .with_values("augment", noise_sigma=sigma).with_values("seeds", train=seed))
    assert ExperimentConfig.loads(cfg.dumps()) == cfg


def test_partial_file_uses_defaults():
    cfg = ExperimentConfig.loads("[train]\nbatch = 8\n")
    assert cfg.train.batch == 8 and cfg.train.lr == 0.001 and cfg.model == ExperimentConfig().model


@pytest.mark.parametrize("text", ["[train]\nspeed = 3\n", "[warp]\nx = 1\n", "[train]\nbatch = many\n",
                                  "[train]\nbatch = 0\n", "[model]\nheads = 5\n", "not an ini"])
def test_rejects_bad_files(text):
    with pytest.raises(ConfigError):
        ExperimentConfig.loads(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="nope.ini"):
        ExperimentConfig.load(tmp_path / "nope.ini")


def test_every_section_serialized():
    text = ExperimentConfig().dumps()
    for f in dataclasses.fields(ExperimentConfig):
        assert f"[{f.name}]" in text
