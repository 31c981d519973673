import math

import pytest

from edgesdf.config import RunConfig, build_config, load_config, read_sections
from edgesdf.errors import ConfigError


def test_defaults():
    cfg = load_config()
    assert cfg == build_config({})
    assert cfg.train.batch_size == 128 and cfg.train.learning_rate == 1e-4 and cfg.train.iterations == 10000
    assert cfg.loss.tau_edge == 20.0 and cfg.loss.lambda_normal == 0.0
    assert cfg.train.weights == cfg.loss


def test_file_and_overrides(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text("[model]\ninput_dim = 2\nhidden_width = 32\nskip_layers = 1, 2\n\n"
                 "[train]\niterations = 50\ndeterministic = no\n\n[loss]\ntau_edge = inf\n")
    cfg = load_config(p, ["train.iterations=7", " loss.lambda_laplacian = 0 "])
    assert cfg.model.input_dim == 2 and cfg.model.hidden_width == 32 and cfg.model.skip_layers == (1, 2)
    assert cfg.train.iterations == 7 and cfg.train.deterministic is False
    assert math.isinf(cfg.loss.tau_edge) and cfg.loss.lambda_laplacian == 0.0
    assert cfg.train.weights.lambda_laplacian == 0.0


def test_ini_round_trip(tmp_path):
    cfg = load_config(None, ["model.input_dim=2", "loss.tau_edge=inf", "model.skip_layers=1"])
    p = tmp_path / "echo.ini"
    p.write_text(cfg.to_ini())
    assert load_config(p) == cfg


@pytest.mark.parametrize("overrides", [["model.nope=1"], ["bogus.key=1"], ["train.iterations=ten"],
                                       ["train.iterations=0"], ["train.deterministic=maybe"], ["noequals"],
                                       ["model.hidden_width=-3"], ["loss.tau_edge=0"]])
def test_rejects_bad_input(overrides):
    with pytest.raises(ConfigError):
        load_config(None, overrides)


def test_malformed_file(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("iterations = 3\n")
    with pytest.raises(ConfigError):
        read_sections(p)
    with pytest.raises(FileNotFoundError):
        read_sections(tmp_path / "missing.ini")


def test_to_dict_is_json_ready():
    import json
    d = RunConfig().to_dict()
    assert set(d) == {"model", "train", "loss", "data", "mesh", "metrics"}
    assert d["model"]["skip_layers"] == [4]
    json.dumps(load_config(None, ["loss.tau_edge=inf"]).to_dict(), allow_nan=False)
