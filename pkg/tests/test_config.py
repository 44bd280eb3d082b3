import pytest

import oracles
from sindylom.config import ConfigError, RunConfig, build_config, load_config_file


def write(tmp_path, text):
    f = tmp_path / "run.toml"
    f.write_text(text)
    return f


def test_defaults():
    cfg = build_config(environ={})
    assert cfg.lam == oracles.PUBLISHED_LAMBDA
    assert cfg.kappa == oracles.PUBLISHED_KAPPA
    lom = cfg.lom_config()
    assert lom.ga.init_high == oracles.PUBLISHED_INIT_HALF_WIDTH
    assert lom.weights.q is None and lom.stlsq.k_max == 10


def test_precedence(tmp_path):
    f = write(tmp_path, '[stlsq]\nlambda = 1e-3\n[run]\nseed = 5\nthreads = 2\n')
    cfg = build_config(f, environ={})
    assert (cfg.lam, cfg.seed, cfg.threads) == (1e-3, 5, 2)
    cfg = build_config(f, environ={"SINDYLOM_SEED": "6", "SINDYLOM_LAMBDA": "2e-3"})
    assert (cfg.lam, cfg.seed) == (2e-3, 6)
    cfg = build_config(f, {"seed": 7, "lam": None}, environ={"SINDYLOM_SEED": "6"})
    assert (cfg.lam, cfg.seed) == (1e-3, 7)
    cfg = build_config(None, {}, environ={"SINDYLOM_CONFIG": str(f)})
    assert cfg.seed == 5


def test_paths_relative_to_file(tmp_path):
    f = write(tmp_path, '[data]\nsr = "a.csv"\nll = ["a.csv", "b.csv"]\n')
    data = load_config_file(f)
    assert data["sr"] == str(tmp_path / "a.csv")
    assert data["ll"][1] == str(tmp_path / "b.csv")


def test_strategies(tmp_path):
    f = write(tmp_path, '[[strategy]]\nname = "A"\nrbf_count = 0\n'
                        '[[strategy]]\nname = "B"\noptimize = true\n')
    assert [s["name"] for s in build_config(f, environ={}).strategies] == ["A", "B"]


@pytest.mark.parametrize("text", ["[bogus]\na = 1\n", "[ga]\nspeed = 3\n", "[ga\n",
                                  "[ga]\npopulation_size = 1\n", "[run]\nthreads = 0\n",
                                  "[library]\nrbf_count = -1\n"])
def test_rejects_bad_files(tmp_path, text):
    with pytest.raises(ConfigError):
        build_config(write(tmp_path, text), environ={})


def test_rejects_bad_env_and_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        build_config(environ={"SINDYLOM_SEED": "x"})
    with pytest.raises(ConfigError):
        build_config(tmp_path / "none.toml", environ={})


def test_snapshot_covers_all_fields():
    assert set(RunConfig().snapshot()) == set(RunConfig.__dataclass_fields__)
