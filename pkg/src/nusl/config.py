"""TOML run configurations for sweeps and tail experiments.

Schema (every table optional; omitted keys take the defaults shown)::

    master_seed = 0

    [dictionary]
    kind = "gaussian"          # gaussian | subsampled_dct | file
    d = 128
    K = 256
    seed = 0
    path = "phi.csv"           # file kind only

    [distribution]
    kind = "quadratic"         # uniform | linear | quadratic | step
    step_ratio = 10.0

    [coefficients]
    kind = "unit"              # unit | geometric
    alpha = 0.9

    [sweep]
    S_range = [1, 5, 9]        # or { start = 1, stop = 80, step = 4 }, stop inclusive
    n_trials = 200
    algorithms = ["thresholding", "omp", "bp"]
    sensing_modes = ["none", "uniform", "matched"]
    timing = false             # fill mean_runtime_ms (makes output run-dependent)
    coeff_tol = 1e-4
    support_tol = 1e-6

    [tails]
    statistic = "submatrix_op_norm"   # | restricted_row_norm | cross_op_norm
    S = 8
    n_trials = 100000
    r_grid = [0.5, 1.0]        # omitted: automatic grid

The hash of a configuration is taken over the fully resolved form, so
reordering keys or spelling out a default does not change it.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .experiments import (ALGORITHMS, SENSING_MODES, STATISTICS, CoeffSpec, DictionarySpec,
                          SweepConfig)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TailConfig:
    dictionary: DictionarySpec = DictionarySpec(d=64, K=128)
    distribution: str = "quadratic"
    step_ratio: float = 10.0
    statistic: str = "submatrix_op_norm"
    S: int = 8
    n_trials: int = 100_000
    r_grid: Optional[tuple] = None
    master_seed: int = 0


def load_toml(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        return tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _take(table, name, allowed):
    t = table.get(name, {})
    if not isinstance(t, dict):
        raise ConfigError(f"[{name}] must be a table")
    extra = set(t) - set(allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(extra))}")
    return t


def _check_top(raw, tables):
    extra = set(raw) - set(tables) - {"master_seed"}
    if extra:
        raise ConfigError(f"unknown key(s): {', '.join(sorted(extra))}")


def _dictionary(raw, default: DictionarySpec) -> DictionarySpec:
    t = _take(raw, "dictionary", [f.name for f in fields(DictionarySpec)])
    spec = DictionarySpec(**{**asdict(default), **t})
    if spec.kind not in ("gaussian", "subsampled_dct", "file"):
        raise ConfigError(f"unknown dictionary kind {spec.kind!r}")
    return spec


def _s_range(v):
    if isinstance(v, dict):
        try:
            start, stop, step = int(v["start"]), int(v["stop"]), int(v.get("step", 1))
        except KeyError as exc:
            raise ConfigError(f"S_range table needs {exc.args[0]!r}") from None
        if step < 1:
            raise ConfigError("S_range step must be positive")
        return tuple(range(start, stop + 1, step))
    if isinstance(v, list) and all(isinstance(s, int) for s in v):
        return tuple(v)
    raise ConfigError("S_range must be a list of integers or a {start, stop, step} table")


def _names(v, allowed, what):
    if not isinstance(v, list) or any(x not in allowed for x in v):
        raise ConfigError(f"{what} must be a list drawn from {list(allowed)}")
    return tuple(v)


def sweep_config(raw: dict, seed: Optional[int] = None) -> SweepConfig:
    _check_top(raw, ["dictionary", "distribution", "coefficients", "sweep", "tails"])
    dist = _take(raw, "distribution", ["kind", "step_ratio"])
    coeff = _take(raw, "coefficients", ["kind", "alpha"])
    sw = _take(raw, "sweep", ["S_range", "n_trials", "algorithms", "sensing_modes", "timing",
                              "coeff_tol", "support_tol"])
    base = SweepConfig()
    kw = {
        "dictionary": _dictionary(raw, base.dictionary),
        "distribution": dist.get("kind", base.distribution),
        "step_ratio": float(dist.get("step_ratio", base.step_ratio)),
        "coefficients": CoeffSpec(coeff.get("kind", "unit"), float(coeff.get("alpha", 0.9))),
        "master_seed": int(raw.get("master_seed", 0) if seed is None else seed),
    }
    if "S_range" in sw:
        kw["S_range"] = _s_range(sw["S_range"])
    if "algorithms" in sw:
        kw["algorithms"] = _names(sw["algorithms"], ALGORITHMS, "algorithms")
    if "sensing_modes" in sw:
        kw["sensing_modes"] = _names(sw["sensing_modes"], SENSING_MODES, "sensing_modes")
    for key, cast in (("n_trials", int), ("timing", bool), ("coeff_tol", float), ("support_tol", float)):
        if key in sw:
            kw[key] = cast(sw[key])
    cfg = SweepConfig(**kw)
    if cfg.coefficients.kind not in ("unit", "geometric"):
        raise ConfigError(f"unknown coefficient kind {cfg.coefficients.kind!r}")
    if cfg.n_trials < 1:
        raise ConfigError("n_trials must be at least 1")
    return cfg


def tail_config(raw: dict, seed: Optional[int] = None) -> TailConfig:
    _check_top(raw, ["dictionary", "distribution", "coefficients", "sweep", "tails"])
    dist = _take(raw, "distribution", ["kind", "step_ratio"])
    t = _take(raw, "tails", ["statistic", "S", "n_trials", "r_grid"])
    base = TailConfig()
    grid = t.get("r_grid")
    cfg = TailConfig(
        dictionary=_dictionary(raw, base.dictionary),
        distribution=dist.get("kind", base.distribution),
        step_ratio=float(dist.get("step_ratio", base.step_ratio)),
        statistic=t.get("statistic", base.statistic),
        S=int(t.get("S", base.S)),
        n_trials=int(t.get("n_trials", base.n_trials)),
        r_grid=None if grid is None else tuple(float(r) for r in grid),
        master_seed=int(raw.get("master_seed", 0) if seed is None else seed),
    )
    if cfg.statistic not in STATISTICS:
        raise ConfigError(f"unknown statistic {cfg.statistic!r}")
    if cfg.n_trials < 1:
        raise ConfigError("n_trials must be at least 1")
    return cfg


def canonical(cfg) -> dict:
    """Plain JSON-able form of a resolved configuration."""
    return json.loads(json.dumps(asdict(cfg)))


def config_hash(cfg) -> str:
    text = json.dumps(canonical(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()
