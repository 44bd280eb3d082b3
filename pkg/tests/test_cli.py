import csv
import json

import numpy as np
import pytest

from sindylom.cli import main
from sindylom.dataset import TimeSeriesDataset, load_csv, save_csv
from sindylom.library import polynomial_library
from sindylom.model_io import load_model, save_model
from sindylom.rollout import SindyModel


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for var in ("SINDYLOM_SEED", "SINDYLOM_CONFIG", "SINDYLOM_OUT_DIR", "SINDYLOM_THREADS",
                "SINDYLOM_LAMBDA", "SINDYLOM_KAPPA"):
        monkeypatch.delenv(var, raising=False)
    return tmp_path


def sim(plant, seed, out, n=400):
    assert main(["simulate", "--plant", plant, "--n-steps", str(n), "--seed", str(seed),
                 "--out", out]) == 0


def test_simulate(workdir, capsys):
    sim("P1", 1, "p1.csv")
    ds = load_csv("p1.csv", 2, 1)
    assert len(ds) == 401
    assert "wrote 401 samples" in capsys.readouterr().out
    assert main(["simulate", "--plant", "P3", "--n-steps", "50", "--excitation", "sines",
                 "--low", "0", "--high", "1", "--out", "s.csv"]) == 0
    w = load_csv("s.csv", 1, 1).inputs
    assert w.min() >= 0 and w.max() <= 1


def test_fit_recovers_linear_plant(workdir, capsys):
    sim("P1", 1, "p1.csv", n=2000)
    assert main(["fit", "--sr", "p1.csv", "--out-dir", "fit"]) == 0
    out = capsys.readouterr().out
    assert "||Xi||_0 = 3" in out and "J_os" in out
    m = load_model("fit/model.json")
    assert m.xi.support == [(1, 3), (1,)]
    assert (workdir / "fit" / "report.txt").exists()
    assert (workdir / "fit" / "coefficients.png").stat().st_size > 0


def test_missing_dataset_is_usage_error(workdir, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["fit", "--sr", "missing.csv"])
    assert exc.value.code == 2
    assert "dataset not found" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["fit"])
    assert exc.value.code == 2


def test_module_error_exits_one(workdir, capsys):
    (workdir / "bad.csv").write_text("x1,w1\n1,0\nnan,1\n")
    assert main(["fit", "--sr", "bad.csv"]) == 1
    assert "non-finite" in capsys.readouterr().err


def test_lambda_default_and_override(workdir):
    sim("P1", 1, "p1.csv")
    main(["fit", "--sr", "p1.csv", "--out-dir", "a", "--no-plots"])
    main(["fit", "--sr", "p1.csv", "--out-dir", "b", "--no-plots", "--lambda", "0.7"])
    a = json.loads((workdir / "a" / "model.json").read_text())["provenance"]["config"]
    b = json.loads((workdir / "b" / "model.json").read_text())["provenance"]["config"]
    assert a["lam"] == 8e-5 and b["lam"] == 0.7
    assert load_model("b/model.json").xi.l0 == 1


LOM = ["--rbf-over", "0", "--population", "12", "--generations", "5",
       "--init-low=-3,0.05", "--init-high=3,2", "--no-plots"]


def test_lom_reproducible(workdir, capsys):
    sim("P3", 1, "sr.csv")
    sim("P3", 2, "oll.csv")
    args = ["lom", "--sr", "sr.csv", "--ll", "sr.csv", "--ll", "oll.csv", *LOM, "--seed", "4"]
    assert main([*args, "--out-dir", "r1"]) == 0
    assert main([*args, "--out-dir", "r2", "--threads", "2"]) == 0
    for f in ("model.json", "convergence.csv", "report.txt"):
        assert (workdir / "r1" / f).read_bytes() == (workdir / "r2" / f).read_bytes()
    rows = list(csv.DictReader(open(workdir / "r1" / "convergence.csv")))
    assert len(rows) == 6
    best = [float(r["best_j_ms"]) for r in rows]
    assert best == sorted(best, reverse=True)
    assert "kappa" in json.dumps(json.loads((workdir / "r1" / "model.json").read_text()))


def test_lom_needs_rbfs(workdir):
    sim("P3", 1, "sr.csv")
    with pytest.raises(SystemExit) as exc:
        main(["lom", "--sr", "sr.csv", "--rbf-count", "0"])
    assert exc.value.code == 2


def test_predict_modes(workdir, capsys):
    sim("P1", 1, "p1.csv")
    main(["fit", "--sr", "p1.csv", "--out-dir", "fit", "--no-plots"])
    capsys.readouterr()
    assert main(["predict", "--model", "fit/model.json", "--data", "p1.csv",
                 "--out", "rlt.csv"]) == 0
    out = capsys.readouterr().out
    assert "completed" in out
    rows = list(csv.DictReader(open(workdir / "rlt.csv")))
    assert list(rows[0]) == ["k", "x1_true", "x1_pred", "x2_true", "x2_pred", "diverged"]
    assert len(rows) == 401
    err = max(abs(float(r["x1_true"]) - float(r["x1_pred"])) for r in rows)
    assert err < 1e-9
    assert (workdir / "rlt.png").exists()
    assert main(["predict", "--model", "fit/model.json", "--data", "p1.csv",
                 "--mode", "one-step", "--out", "os.csv", "--no-plots"]) == 0
    rows = list(csv.DictReader(open(workdir / "os.csv")))
    assert rows[0]["k"] == "1" and len(rows) == 400


def test_predict_diverging_model(workdir, capsys):
    ds = TimeSeriesDataset(np.ones((60, 1)), np.zeros((60, 0)), name="ones")
    save_csv(ds, workdir / "ones.csv")
    save_model(SindyModel(polynomial_library(1, 0, 1), [], [[0.0], [2.0]]), workdir / "m.json")
    assert main(["predict", "--model", "m.json", "--data", "ones.csv", "--out", "p.csv"]) == 0
    out = capsys.readouterr().out
    assert "diverged at step 27" in out
    rows = list(csv.DictReader(open(workdir / "p.csv")))
    assert len(rows) == 27 and all(r["diverged"] == "1" for r in rows)


def test_compare_and_model_info(workdir, capsys):
    sim("P3", 1, "sr.csv")
    sim("P3", 2, "oll.csv")
    (workdir / "cmp.toml").write_text(
        '[data]\nsr = "sr.csv"\nll = ["sr.csv", "oll.csv"]\n'
        '[library]\nrbf_over = [0]\n'
        '[ga]\npopulation_size = 12\nmax_generations = 5\n'
        'init_low = [-3, 0.05]\ninit_high = [3, 2]\n'
        '[run]\nout_dir = "cmp"\n')
    assert main(["compare", "--config", "cmp.toml"]) == 0
    out = workdir / "cmp"
    for f in ("error_table.csv", "xi_patterns.csv", "summary.txt", "model_S1.json", "model_S3.json",
              "convergence_S3.csv", "xi_patterns.png", "rlt_sr.png", "one_step_oll.png"):
        assert (out / f).exists(), f
    rows = list(csv.DictReader(open(out / "error_table.csv")))
    assert [(r["strategy"], r["dataset"]) for r in rows] == [
        (s, d) for s in ("S1", "S2", "S3") for d in ("sr", "oll")]
    capsys.readouterr()
    assert main(["model-info", "--model", str(out / "model_S3.json")]) == 0
    info = capsys.readouterr().out
    assert "rbf1: center" in info and "x1(k+1) =" in info


def test_env_overrides(workdir, monkeypatch):
    sim("P1", 1, "p1.csv")
    monkeypatch.setenv("SINDYLOM_OUT_DIR", "envout")
    monkeypatch.setenv("SINDYLOM_LAMBDA", "0.7")
    assert main(["fit", "--sr", "p1.csv", "--no-plots"]) == 0
    assert load_model(workdir / "envout" / "model.json").xi.l0 == 1
