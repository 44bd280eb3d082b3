"""Command-line front end.

    sindylom simulate --plant P3 --n-steps 1000 --seed 1 --out sr.csv
    sindylom fit      --sr sr.csv --out-dir fit/
    sindylom lom      --sr sr.csv --ll sr.csv --ll oll.csv --rbf-count 1 --out-dir lom/
    sindylom predict  --model lom/model.json --data oll.csv --mode rlt --out-dir pred/
    sindylom compare  --config compare.toml
    sindylom model-info --model lom/model.json

Every command writes CSV artifacts and, unless ``--no-plots`` is given,
PNG figures next to them.  Exit status is 0 on success (a diverged
rollout is a result, not an error), 1 on a runtime error, 2 on bad usage.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, build_config
from .dataset import TimeSeriesDataset, infer_layout, load_csv, save_csv, shifted
from .library import LibrarySpec, append_rbfs, polynomial_library
from .liboptim import Strategy, optimize, run_strategy_comparison
from .loss import j_ms, j_os
from .model_io import ModelFormatError, load_model, load_provenance, save_model
from .rollout import SindyModel, predict_one_step, predict_rlt
from .stlsq import fit
from .synth import ExcitationSpec, SimulationError, get_plant, simulate

log = logging.getLogger("sindylom")

# run settings that do not affect results stay out of model provenance
_EXECUTION_ONLY = ("threads", "out_dir", "plots")


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _phi_arg(text: str):
    return text if text == "random" else _floats(text)


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("common")
    g.add_argument("--config", help="TOML run configuration")
    g.add_argument("--seed", type=int)
    g.add_argument("--out-dir", dest="out_dir")
    g.add_argument("--lambda", dest="lam", type=float, help="STLSQ threshold (default 8e-5)")
    g.add_argument("--kappa", type=float, help="l0 weight in J_ms (default 8e-7)")
    g.add_argument("--threads", type=int)
    g.add_argument("--no-plots", dest="plots", action="store_const", const=False)
    g.add_argument("-v", "--verbose", action="store_true")


def _data(p: argparse.ArgumentParser, ll: bool = True) -> None:
    g = p.add_argument_group("data")
    g.add_argument("--sr", help="sparse-regression dataset (CSV)")
    if ll:
        g.add_argument("--ll", action="append", help="long-term dataset (repeatable)")
        g.add_argument("--eval", action="append", help="reporting dataset (repeatable)")
    g.add_argument("--n-state", dest="n_state", type=int)
    g.add_argument("--m-input", dest="m_input", type=int)


def _library(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("library")
    g.add_argument("--degree", type=int)
    g.add_argument("--rbf-count", dest="rbf_count", type=int)
    g.add_argument("--rbf-over", dest="rbf_over", type=_ints,
                   help="comma list of 0-based (x, w) variable indices the RBFs act on")
    g.add_argument("--phi", type=_phi_arg, help="comma list of RBF parameters, or 'random'")
    g.add_argument("--k-max", dest="k_max", type=int)


def _ga(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("genetic algorithm")
    g.add_argument("--population", dest="population_size", type=int)
    g.add_argument("--generations", dest="max_generations", type=int)
    g.add_argument("--stall", dest="stall_generations", type=int)
    g.add_argument("--init-low", dest="init_low", type=_floats)
    g.add_argument("--init-high", dest="init_high", type=_floats)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sindylom",
        description="Sparse identification of discrete-time dynamics with library optimization",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a dataset from a built-in plant")
    p.add_argument("--plant", required=True, help="P1, P2, P3 or P4")
    p.add_argument("--n-steps", dest="n_steps", type=int, default=1000)
    p.add_argument("--noise", type=float, default=0.0, help="observation noise stddev")
    p.add_argument("--excitation", choices=["steps", "sines", "chirp"])
    p.add_argument("--low", type=float)
    p.add_argument("--high", type=float)
    p.add_argument("--hold", type=int)
    p.add_argument("--out", required=True, help="output CSV path")
    _common(p)

    p = sub.add_parser("fit", help="plain sparse regression with a fixed library")
    _data(p)
    _library(p)
    _ga(p)
    _common(p)

    p = sub.add_parser("lom", help="optimize RBF library parameters for long-term accuracy")
    _data(p)
    _library(p)
    _ga(p)
    _common(p)

    p = sub.add_parser("predict", help="one-step or recursive prediction with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--mode", choices=["rlt", "one-step"], default="rlt")
    p.add_argument("--out", help="prediction CSV (default: <out-dir>/predictions.csv)")
    _common(p)

    p = sub.add_parser("compare", help="run several modeling strategies on the same data")
    _data(p)
    _library(p)
    _ga(p)
    _common(p)

    p = sub.add_parser("model-info", help="describe a saved model")
    p.add_argument("--model", required=True)
    return parser


def _flag_values(args: argparse.Namespace) -> dict:
    known = set(RunConfig.__dataclass_fields__)
    return {k: v for k, v in vars(args).items() if k in known and v is not None}


def _resolve(args) -> RunConfig:
    return build_config(getattr(args, "config", None), _flag_values(args))


def _require(path, what: str) -> None:
    if not Path(path).is_file():
        raise UsageError(f"{what} not found: {path}")


def _load(path: str, cfg: RunConfig) -> TimeSeriesDataset:
    _require(path, "dataset")
    if cfg.n_state is not None:
        n, m = cfg.n_state, cfg.m_input or 0
    else:
        n, m = infer_layout(path)
    return load_csv(path, n, m)


def _load_many(paths, cfg: RunConfig, sr: TimeSeriesDataset, sr_path: str):
    # the SR file listed again as an LL or eval set is the same dataset object
    same = Path(sr_path).resolve()
    return _unique([sr if Path(p).resolve() == same else _load(p, cfg) for p in paths])


def _unique(datasets: list[TimeSeriesDataset]) -> list[TimeSeriesDataset]:
    seen, out = {}, []
    for d in datasets:
        if any(d is o for o in out):
            out.append(d)
            continue
        name, k = d.name, 2
        while name in seen:
            name, k = f"{d.name}_{k}", k + 1
        seen[name] = True
        out.append(d if name == d.name else d.renamed(name))
    return out


def _library_for(cfg: RunConfig, n: int, m: int, rbf_count: int, degree=None) -> LibrarySpec:
    spec = polynomial_library(n, m, cfg.degree if degree is None else degree)
    if rbf_count:
        spec = append_rbfs(spec, rbf_count, over=cfg.rbf_over)
    return spec


def _phi_for(spec: LibrarySpec, phi, cfg: RunConfig, seed: int) -> np.ndarray:
    if spec.phi_dim == 0:
        return np.zeros(0)
    if phi is None or phi == "random":
        low, high = cfg.lom_config().ga.bounds(spec.phi_dim)
        return np.random.default_rng(seed).uniform(low, high)
    phi = np.asarray(phi, dtype=float)
    if phi.size != spec.phi_dim:
        raise ValueError(f"phi has {phi.size} values, the library needs {spec.phi_dim}")
    return phi


def _provenance(cfg: RunConfig, command: str, datasets, **extra) -> dict:
    snap = {k: v for k, v in cfg.snapshot().items() if k not in _EXECUTION_ONLY}
    return {"command": command, "config": snap, "seed": cfg.seed,
            "datasets": [d.name for d in datasets], **extra}


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt(v: float) -> str:
    return "%.17g" % v


def _terms(model: SindyModel) -> list[str]:
    names = model.spec.names()
    lines = []
    for j in range(model.spec.n_state):
        parts = [f"{model.Xi[i, j]:+.6g}*{names[i]}" for i in np.flatnonzero(model.Xi[:, j])]
        lines.append(f"x{j + 1}(k+1) = " + (" ".join(parts) if parts else "0"))
    return lines


# -- commands ---------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _resolve(args)
    plant = get_plant(args.plant).with_noise(args.noise)
    base = plant.excitation
    exc = ExcitationSpec(
        kind=args.excitation or base.kind,
        low=base.low if args.low is None else args.low,
        high=base.high if args.high is None else args.high,
        hold=base.hold if args.hold is None else args.hold,
    )
    ds = simulate(plant, exc, N=args.n_steps, seed=cfg.seed,
                  name=Path(args.out).stem)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_csv(ds, args.out)
    print(f"{plant.name}: wrote {len(ds)} samples ({ds.n_state} states, {ds.m_input} inputs)"
          f" to {args.out}")
    return 0


def cmd_fit(args) -> int:
    cfg = _resolve(args)
    if not cfg.sr:
        raise UsageError("fit needs a sparse-regression dataset (--sr or [data] sr)")
    sr = _load(cfg.sr, cfg)
    ll = _load_many(cfg.ll, cfg, sr, cfg.sr)
    spec = _library_for(cfg, sr.n_state, sr.m_input, cfg.rbf_count or 0)
    phi = _phi_for(spec, cfg.phi, cfg, cfg.seed)
    xi = fit(spec, shifted(sr), phi, cfg.stlsq_config())
    model = SindyModel(spec, phi, xi)
    jos = _j_os_or_inf(model, sr)
    report = j_ms(model, ll, cfg.lom_config().weights, cfg.bound, cfg.penalty) if ll else None

    out = _out_dir(cfg)
    save_model(model, out / "model.json", report,
               _provenance(cfg, "fit", [sr, *ll], j_os=jos))
    lines = [f"dataset     = {sr.name}", f"J_os        = {jos:.10g}",
             f"||Xi||_0    = {xi.l0}", *_terms(model)]
    if report is not None:
        lines += ["", report.format()]
    (out / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if cfg.plots:
        from .plotting import plot_coefficients
        plot_coefficients({"fit": model}, out / "coefficients.png")
    print(f"||Xi||_0 = {xi.l0}")
    print(f"J_os = {jos:.10g}")
    for line in _terms(model):
        print(line)
    return 0


def _j_os_or_inf(model, ds) -> float:
    try:
        return j_os(model, ds)
    except FloatingPointError:
        return math.inf


def cmd_lom(args) -> int:
    cfg = _resolve(args)
    if not cfg.sr:
        raise UsageError("lom needs a sparse-regression dataset (--sr or [data] sr)")
    sr = _load(cfg.sr, cfg)
    ll = _load_many(cfg.ll, cfg, sr, cfg.sr) if cfg.ll else [sr]
    spec = _library_for(cfg, sr.n_state, sr.m_input,
                        1 if cfg.rbf_count is None else cfg.rbf_count)
    if spec.phi_dim == 0:
        raise UsageError("lom needs at least one RBF (--rbf-count >= 1)")
    lom = cfg.lom_config()

    def progress(rec):
        log.info("generation %d: best J_ms %.6g", rec.generation, rec.best)

    trace = optimize(spec, sr, ll, lom, callback=progress)
    model = trace.model
    out = _out_dir(cfg)
    trace.to_csv(out / "convergence.csv")
    save_model(model, out / "model.json", trace.report,
               _provenance(cfg, "lom", [sr, *ll], n_evaluations=trace.n_evaluations,
                           generations=len(trace.records) - 1, stopped_by=trace.stopped_by))
    lines = [trace.report.format(), "", *_terms(model), "",
             "phi* = [" + ", ".join(_fmt(v) for v in trace.phi_star) + "]",
             f"generations = {len(trace.records) - 1} ({trace.stopped_by})",
             f"evaluations = {trace.n_evaluations}"]
    (out / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if cfg.plots:
        from .plotting import plot_coefficients, plot_convergence
        plot_convergence(trace.records, out / "convergence.png")
        plot_coefficients({"lom": model}, out / "coefficients.png")
    print(f"J_ms = {trace.report.j_ms:.10g}")
    print(f"||Xi||_0 = {trace.report.l0_count}")
    print("phi* = [" + ", ".join(f"{v:.6g}" for v in trace.phi_star) + "]")
    return 0


def cmd_predict(args) -> int:
    cfg = _resolve(args)
    _require(args.model, "model file")
    _require(args.data, "dataset")
    model = load_model(args.model)
    ds = load_csv(args.data, model.spec.n_state, model.spec.m_input)
    out_path = Path(args.out) if args.out else _out_dir(cfg) / "predictions.csv"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    n = model.spec.n_state
    header = ["k"]
    for j in range(n):
        header += [f"x{j + 1}_true", f"x{j + 1}_pred"]
    header.append("diverged")

    if args.mode == "rlt":
        res = predict_rlt(model, ds, cfg.bound)
        pred, k0 = res.trajectory, 0
        truth = ds.states[: len(pred)]
        flags = np.full(len(pred), int(res.diverged))
        status = f"diverged at step {res.diverged_at}" if res.diverged else "completed"
    else:
        pred, k0 = predict_one_step(model, ds), 1
        truth = ds.states[1:]
        with np.errstate(invalid="ignore"):
            bad = ~(np.abs(pred) <= cfg.bound).all(axis=1)
        flags = bad.astype(int)
        status = f"{int(bad.sum())} diverged samples" if bad.any() else "completed"

    with out_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(len(pred)):
            row = [k0 + k]
            for j in range(n):
                row += [_fmt(truth[k, j]), _fmt(pred[k, j])]
            w.writerow(row + [flags[k]])

    print(f"mode = {args.mode}, status = {status}")
    ok = np.isfinite(pred).all(axis=1)
    for j in range(n):
        if args.mode == "rlt" and res.diverged:
            print(f"||E_{j + 1}||_2 = diverged")
        else:
            err = float(np.linalg.norm(pred[ok, j] - truth[ok, j]))
            print(f"||E_{j + 1}||_2 = {err:.6g}")
    if cfg.plots and len(pred):
        from .plotting import plot_prediction
        plot_prediction(ds.states[k0:], {args.mode: pred}, out_path.with_suffix(".png"), k0=k0,
                        title=f"{args.mode} prediction on {ds.name} ({status})")
    return 0


DEFAULT_STRATEGIES = (
    {"name": "S1", "rbf_count": 0},
    {"name": "S2", "phi": "random"},
    {"name": "S3", "optimize": True},
)


def _strategies(cfg: RunConfig, n: int, m: int) -> list[Strategy]:
    out = []
    raw = cfg.strategies or list(DEFAULT_STRATEGIES)
    for i, s in enumerate(raw):
        unknown = set(s) - {"name", "rbf_count", "phi", "optimize", "degree"}
        if unknown:
            raise ConfigError(f"unknown strategy keys {sorted(unknown)}")
        name = str(s.get("name", f"S{i + 1}"))
        count = s.get("rbf_count", 1 if cfg.rbf_count is None else cfg.rbf_count)
        spec = _library_for(cfg, n, m, int(count), s.get("degree"))
        if s.get("optimize", False):
            out.append(Strategy(name, spec, optimize=True))
        else:
            phi = _phi_for(spec, s.get("phi", cfg.phi), cfg, cfg.seed + 1000 + i)
            out.append(Strategy(name, spec, tuple(phi.tolist())))
    names = [s.name for s in out]
    if len(set(names)) != len(names):
        raise ConfigError("strategy names must be unique")
    return out


def cmd_compare(args) -> int:
    cfg = _resolve(args)
    if not cfg.sr:
        raise UsageError("compare needs a sparse-regression dataset (--sr or [data] sr)")
    sr = _load(cfg.sr, cfg)
    ll = _load_many(cfg.ll, cfg, sr, cfg.sr) if cfg.ll else [sr]
    ev = _load_many(cfg.eval, cfg, sr, cfg.sr) if cfg.eval else None
    strategies = _strategies(cfg, sr.n_state, sr.m_input)
    report = run_strategy_comparison(strategies, sr, ll, cfg.lom_config(), ev)

    out = _out_dir(cfg)
    report.write_table_csv(out / "error_table.csv")
    report.write_xi_csv(out / "xi_patterns.csv")
    for name, model in report.models.items():
        save_model(model, out / f"model_{name}.json", report.losses[name],
                   _provenance(cfg, "compare", [sr, *ll], strategy=name))
    for name, trace in report.traces.items():
        trace.to_csv(out / f"convergence_{name}.csv")
    text = report.table()
    (out / "summary.txt").write_text(text + "\n", encoding="utf-8")
    if cfg.plots:
        from .plotting import plot_coefficients, plot_convergence, plot_prediction
        plot_coefficients(report.models, out / "xi_patterns.png")
        for name, trace in report.traces.items():
            plot_convergence(trace.records, out / f"convergence_{name}.png")
        datasets = ev if ev is not None else [sr, *[d for d in ll if d is not sr]]
        for ds in datasets:
            N = len(ds) - 1
            rlt = {k: predict_rlt(m, ds, cfg.bound, horizon=N).trajectory
                   for k, m in report.models.items()}
            plot_prediction(ds.states[:N], rlt, out / f"rlt_{ds.name}.png",
                            title=f"recursive prediction, {ds.name}")
            with np.errstate(all="ignore"):
                one = {k: predict_one_step(m, ds) for k, m in report.models.items()}
            plot_prediction(ds.states[1:], one, out / f"one_step_{ds.name}.png", k0=1,
                            title=f"one-step prediction, {ds.name}")
    print(text)
    return 0


def cmd_model_info(args) -> int:
    _require(args.model, "model file")
    model = load_model(args.model)
    prov = load_provenance(args.model)
    spec = model.spec
    print(f"library: p = {spec.p}, n_state = {spec.n_state}, m_input = {spec.m_input},"
          f" phi_dim = {spec.phi_dim}")
    print(f"||Xi||_0 = {model.xi.l0}")
    for line in _terms(model):
        print(line)
    for k, (mu, sigma) in enumerate(spec.rbf_blocks(model.phi), start=1):
        print(f"rbf{k}: center = {mu.tolist()}, scale = {sigma.tolist()}")
    if "command" in prov:
        print(f"produced by: {prov['command']} (seed {prov.get('seed')})")
    rep = prov.get("loss_report")
    if rep:
        print(f"J_ms = {rep['j_ms']}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "lom": cmd_lom,
    "predict": cmd_predict,
    "compare": cmd_compare,
    "model-info": cmd_model_info,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        parser.error(str(exc))
    except (ValueError, KeyError, FileNotFoundError, ModelFormatError, SimulationError,
            FloatingPointError, OSError) as exc:
        print(f"sindylom {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
