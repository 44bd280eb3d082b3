"""Run configuration: defaults, TOML file, ``SINDYLOM_*`` env vars, CLI flags.

Later sources win.  Example file::

    [data]
    sr = "sr.csv"
    ll = ["sr.csv", "oll.csv"]
    eval = ["held_out.csv"]

    [library]
    degree = 2
    rbf_count = 1
    rbf_over = [0]

    [stlsq]
    lambda = 8e-5

    [loss]
    kappa = 8e-7
    q = [1, 1]

    [ga]
    population_size = 40
    max_generations = 100
    init_low = [-3, 0.05]
    init_high = [3, 2]

    [run]
    seed = 7
    threads = 4

    [[strategy]]
    name = "S1"
    rbf_count = 0
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .liboptim import GaConfig, LomConfig
from .loss import DEFAULT_KAPPA, DIVERGENCE_PENALTY, LossWeights
from .rollout import DEFAULT_BOUND
from .stlsq import DEFAULT_LAMBDA, StlsqConfig

ENV_PREFIX = "SINDYLOM_"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # data
    sr: str | None = None
    ll: list[str] = field(default_factory=list)
    eval: list[str] = field(default_factory=list)
    n_state: int | None = None
    m_input: int | None = None
    # library
    degree: int = 2
    rbf_count: int | None = None
    rbf_over: list[int] | None = None
    phi: list[float] | None = None
    # inner layer
    lam: float = DEFAULT_LAMBDA
    k_max: int = 10
    rank_tol: float = 1e-10
    # loss
    kappa: float = DEFAULT_KAPPA
    q: list[float] | None = None
    r: list[float] | None = None
    bound: float = DEFAULT_BOUND
    penalty: float = DIVERGENCE_PENALTY
    # outer layer
    population_size: int = 60
    max_generations: int = 200
    crossover_fraction: float = 0.8
    blend_alpha: float = 0.5
    mutation_stddev: float = 0.1
    mutation_shrink: float = 1.0
    elite_count: int = 2
    tournament_size: int = 3
    init_low: list[float] | float = -500.0
    init_high: list[float] | float = 500.0
    stall_generations: int = 50
    # run
    seed: int = 0
    threads: int = 1
    out_dir: str = "out"
    plots: bool = True
    strategies: list[dict] = field(default_factory=list)

    def stlsq_config(self) -> StlsqConfig:
        return StlsqConfig(lam=self.lam, k_max=self.k_max, rank_tol=self.rank_tol)

    def lom_config(self) -> LomConfig:
        ga = GaConfig(
            population_size=self.population_size, max_generations=self.max_generations,
            crossover_fraction=self.crossover_fraction, blend_alpha=self.blend_alpha,
            mutation_stddev=self.mutation_stddev, mutation_shrink=self.mutation_shrink,
            elite_count=self.elite_count, tournament_size=self.tournament_size,
            init_low=_tuple_or_float(self.init_low), init_high=_tuple_or_float(self.init_high),
            seed=self.seed, stall_generations=self.stall_generations,
        )
        weights = LossWeights(q=self.q, r=self.r, kappa=self.kappa)
        return LomConfig(stlsq=self.stlsq_config(), weights=weights, ga=ga,
                         bound=self.bound, penalty=self.penalty, threads=self.threads)

    def snapshot(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _tuple_or_float(v):
    return tuple(float(a) for a in v) if isinstance(v, (list, tuple)) else float(v)


# TOML section/key -> RunConfig attribute
_FILE_KEYS = {
    "data": {"sr": "sr", "ll": "ll", "eval": "eval", "n_state": "n_state",
             "m_input": "m_input"},
    "library": {"degree": "degree", "rbf_count": "rbf_count", "rbf_over": "rbf_over",
                "phi": "phi"},
    "stlsq": {"lambda": "lam", "k_max": "k_max", "rank_tol": "rank_tol"},
    "loss": {"kappa": "kappa", "q": "q", "r": "r", "bound": "bound", "penalty": "penalty"},
    "ga": {k: k for k in ("population_size", "max_generations", "crossover_fraction",
                          "blend_alpha", "mutation_stddev", "mutation_shrink", "elite_count",
                          "tournament_size", "init_low", "init_high", "stall_generations")},
    "run": {"seed": "seed", "threads": "threads", "out_dir": "out_dir", "plots": "plots"},
}

_ENV_KEYS = {"SEED": ("seed", int), "LAMBDA": ("lam", float), "KAPPA": ("kappa", float),
             "THREADS": ("threads", int), "OUT_DIR": ("out_dir", str)}


def load_config_file(path) -> dict:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    base = path.parent
    out: dict = {}
    for section, body in doc.items():
        if section == "strategy":
            out["strategies"] = list(body)
            continue
        keys = _FILE_KEYS.get(section)
        if keys is None or not isinstance(body, dict):
            raise ConfigError(f"{path}: unknown section [{section}]")
        for k, v in body.items():
            if k not in keys:
                raise ConfigError(f"{path}: unknown key {section}.{k}")
            out[keys[k]] = v
    # data paths in a config file are relative to the file
    for key in ("sr",):
        if isinstance(out.get(key), str):
            out[key] = str(base / out[key])
    for key in ("ll", "eval"):
        if key in out:
            out[key] = [str(base / p) for p in out[key]]
    return out


def env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    out = {}
    for suffix, (attr, cast) in _ENV_KEYS.items():
        raw = environ.get(ENV_PREFIX + suffix)
        if raw is not None and raw != "":
            try:
                out[attr] = cast(raw)
            except ValueError:
                raise ConfigError(f"{ENV_PREFIX}{suffix}={raw!r} is not a valid {cast.__name__}")
    return out


def build_config(config_path=None, flag_values: dict | None = None, environ=None) -> RunConfig:
    cfg = RunConfig()
    values: dict = {}
    environ = os.environ if environ is None else environ
    config_path = config_path or environ.get(ENV_PREFIX + "CONFIG")
    if config_path:
        values.update(load_config_file(config_path))
    values.update(env_overrides(environ))
    values.update({k: v for k, v in (flag_values or {}).items() if v is not None})
    known = {f.name for f in fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown settings: {sorted(unknown)}")
    cfg = replace(cfg, **values)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    try:
        cfg.lom_config()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.degree < 0:
        raise ConfigError("degree must be >= 0")
    if cfg.rbf_count is not None and cfg.rbf_count < 0:
        raise ConfigError("rbf_count must be >= 0")
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
