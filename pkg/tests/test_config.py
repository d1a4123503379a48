import pytest

from nusl.config import (ConfigError, TailConfig, canonical, config_hash, load_toml, sweep_config,
                         tail_config)
from nusl.experiments import SweepConfig

FULL = """
master_seed = 3

[dictionary]
kind = "gaussian"
d = 32
K = 64
seed = 1

[distribution]
kind = "step"
step_ratio = 4.0

[sweep]
S_range = { start = 1, stop = 9, step = 4 }
n_trials = 7
algorithms = ["omp", "bp"]
sensing_modes = ["none", "matched"]
"""

REORDERED = """
master_seed = 3

[sweep]
sensing_modes = ["none", "matched"]
algorithms = ["omp", "bp"]
n_trials = 7
S_range = [1, 5, 9]
timing = false

[distribution]
step_ratio = 4.0
kind = "step"

[dictionary]
seed = 1
K = 64
d = 32
kind = "gaussian"

[coefficients]
kind = "unit"
"""


def _cfg(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return sweep_config(load_toml(p))


def test_full_config_resolves(tmp_path):
    cfg = _cfg(tmp_path, FULL)
    assert cfg.S_range == (1, 5, 9)
    assert cfg.dictionary.d == 32 and cfg.distribution == "step" and cfg.step_ratio == 4.0
    assert cfg.algorithms == ("omp", "bp") and cfg.master_seed == 3


def test_hash_stable_under_reordering_and_explicit_defaults(tmp_path):
    a, b = _cfg(tmp_path, FULL, "a.toml"), _cfg(tmp_path, REORDERED, "b.toml")
    assert a == b
    assert config_hash(a) == config_hash(b)


def test_hash_changes_with_semantics(tmp_path):
    a = _cfg(tmp_path, FULL)
    b = _cfg(tmp_path, FULL.replace("n_trials = 7", "n_trials = 8"))
    assert config_hash(a) != config_hash(b)
    assert config_hash(sweep_config({}, seed=1)) != config_hash(sweep_config({}, seed=2))


def test_empty_config_is_default():
    assert sweep_config({}) == SweepConfig()
    assert tail_config({}) == TailConfig()
    assert canonical(SweepConfig())["S_range"] == list(range(1, 81, 4))


def test_seed_override():
    assert sweep_config({"master_seed": 4}, seed=9).master_seed == 9
    assert tail_config({"master_seed": 4}).master_seed == 4


@pytest.mark.parametrize("raw", [
    {"bogus": 1},
    {"sweep": {"ntrials": 3}},
    {"sweep": {"algorithms": ["lasso"]}},
    {"sweep": {"S_range": "1-5"}},
    {"sweep": {"S_range": {"start": 1}}},
    {"sweep": {"S_range": {"start": 1, "stop": 5, "step": 0}}},
    {"sweep": {"n_trials": 0}},
    {"dictionary": {"kind": "haar"}},
    {"dictionary": 3},
    {"coefficients": {"kind": "laplace"}},
])
def test_bad_sweep_configs(raw):
    with pytest.raises(ConfigError):
        sweep_config(raw)


def test_bad_tail_configs():
    with pytest.raises(ConfigError):
        tail_config({"tails": {"statistic": "trace"}})
    with pytest.raises(ConfigError):
        tail_config({"tails": {"n_trials": 0}})
    cfg = tail_config({"tails": {"r_grid": [1, 2]}})
    assert cfg.r_grid == (1.0, 2.0)


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_toml(tmp_path / "missing.toml")
    p = tmp_path / "bad.toml"
    p.write_text("[sweep\n")
    with pytest.raises(ConfigError):
        load_toml(p)
