"""Outer-layer library optimization.

The library parameters ``phi`` are searched by a seeded real-coded genetic
algorithm.  For every candidate the inner layer refits the sparse
coefficients on the regression dataset, then the whole population is
rolled out together over the long-term datasets to score the recursive
loss.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np

from .dataset import TimeSeriesDataset, shifted
from .library import LibrarySpec, build_matrix
from .loss import DIVERGENCE_PENALTY, LossReport, LossWeights, j_ms_batch, one_step_errors
from .rollout import DEFAULT_BOUND, SindyModel, predict_rlt
from .stlsq import CoefficientMatrix, StlsqConfig, fit, fit_theta


@dataclass(frozen=True)
class GaConfig:
    """Genetic algorithm settings.

    ``mutation_stddev`` is relative to the width of the initialization
    interval and decays linearly to ``1 - mutation_shrink`` of its value by
    the last generation.
    """

    population_size: int = 60
    max_generations: int = 200
    crossover_fraction: float = 0.8
    blend_alpha: float = 0.5
    mutation_stddev: float = 0.1
    mutation_shrink: float = 1.0
    elite_count: int = 2
    tournament_size: int = 3
    init_low: tuple[float, ...] | float = -500.0
    init_high: tuple[float, ...] | float = 500.0
    seed: int = 0
    stall_generations: int = 50

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if not 0 <= self.elite_count < self.population_size:
            raise ValueError("elite_count must lie in [0, population_size)")
        if not 0 < self.crossover_fraction < 1:
            raise ValueError("crossover_fraction must lie in (0, 1)")
        if not self.mutation_stddev > 0:
            raise ValueError("mutation_stddev must be positive")
        if not 0 <= self.mutation_shrink <= 1:
            raise ValueError("mutation_shrink must lie in [0, 1]")
        if self.tournament_size < 1 or self.max_generations < 0 or self.stall_generations < 1:
            raise ValueError("tournament_size, max_generations, stall_generations out of range")

    def bounds(self, dim: int) -> tuple[np.ndarray, np.ndarray]:
        for v in (self.init_low, self.init_high):
            if np.ndim(v) and np.size(v) not in (1, dim):
                raise ValueError(f"init bounds have {np.size(v)} values, phi has {dim}")
        low = np.broadcast_to(np.asarray(self.init_low, dtype=float), (dim,)).copy()
        high = np.broadcast_to(np.asarray(self.init_high, dtype=float), (dim,)).copy()
        if not (low < high).all():
            raise ValueError("init_low must be below init_high elementwise")
        return low, high


@dataclass(frozen=True)
class LomConfig:
    stlsq: StlsqConfig = field(default_factory=StlsqConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    ga: GaConfig = field(default_factory=GaConfig)
    bound: float = DEFAULT_BOUND
    penalty: float = DIVERGENCE_PENALTY
    threads: int = 1


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best: float
    mean: float
    best_phi: tuple[float, ...]
    n_diverged: int


@dataclass(eq=False)
class OptimTrace:
    spec: LibrarySpec
    records: list[GenerationRecord]
    phi_star: np.ndarray
    xi_star: CoefficientMatrix
    report: LossReport
    n_evaluations: int
    stopped_by: str

    @property
    def model(self) -> SindyModel:
        return SindyModel(self.spec, self.phi_star, self.xi_star)

    def best_history(self) -> np.ndarray:
        return np.array([r.best for r in self.records])

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            dim = len(self.records[0].best_phi) if self.records else 0
            w.writerow(["generation", "best_j_ms", "mean_j_ms", "n_diverged"]
                       + [f"phi{i + 1}" for i in range(dim)])
            for r in self.records:
                w.writerow([r.generation, "%.17g" % r.best, "%.17g" % r.mean, r.n_diverged]
                           + ["%.17g" % v for v in r.best_phi])


class Evaluator:
    """Scores a population of ``phi`` candidates (fit + recursive loss)."""

    def __init__(self, spec: LibrarySpec, sr: TimeSeriesDataset,
                 ll: Sequence[TimeSeriesDataset], cfg: LomConfig):
        self.spec = spec
        self.sm = shifted(sr)
        self.ll = list(ll)
        self.cfg = cfg
        self.n_evaluations = 0

    def fit_one(self, phi) -> CoefficientMatrix:
        Theta = build_matrix(self.spec, self.sm, phi)
        if not np.isfinite(Theta).all():
            return CoefficientMatrix(np.zeros((self.spec.p, self.spec.n_state)))
        return fit_theta(Theta, self.sm, self.cfg.stlsq)

    def __call__(self, phis: np.ndarray) -> tuple[list[CoefficientMatrix], list[LossReport]]:
        phis = np.atleast_2d(np.asarray(phis, dtype=float))
        if self.cfg.threads > 1 and len(phis) > 1:
            with ThreadPoolExecutor(max_workers=self.cfg.threads) as pool:
                xis = list(pool.map(self.fit_one, phis))
        else:
            xis = [self.fit_one(phi) for phi in phis]
        Xis = np.stack([x.Xi for x in xis])
        reports = j_ms_batch(self.spec, phis, Xis, self.ll, self.cfg.weights,
                             self.cfg.bound, self.cfg.penalty)
        self.n_evaluations += len(phis)
        return xis, reports


def evaluate_candidate(phi, spec: LibrarySpec, sr: TimeSeriesDataset,
                       ll: Sequence[TimeSeriesDataset], cfg: LomConfig = LomConfig()
                       ) -> tuple[CoefficientMatrix, LossReport]:
    """Inner-layer fit on ``sr`` at ``phi`` followed by the recursive loss on ``ll``."""
    xis, reports = Evaluator(spec, sr, ll, cfg)(np.asarray(phi, dtype=float)[None, :])
    return xis[0], reports[0]


class OuterOptimizer(Protocol):
    def __call__(self, objective: Callable[[np.ndarray], np.ndarray], dim: int,
                 cfg: GaConfig, callback: Callable | None = None
                 ) -> tuple[list[GenerationRecord], np.ndarray, str]: ...


def _tournament(rng, fitness, size):
    idx = rng.integers(0, len(fitness), size=size)
    return idx[np.argmin(fitness[idx])]


def genetic_algorithm(objective, dim: int, cfg: GaConfig, callback=None):
    """Minimize ``objective`` (population -> fitness array) over ``R^dim``.

    Elites survive unchanged, so the best fitness never increases from one
    generation to the next.  The search is unbounded; ``init_low`` and
    ``init_high`` only shape the initial population and mutation scale.
    """
    rng = np.random.default_rng(cfg.seed)
    low, high = cfg.bounds(dim)
    width = high - low
    P, E = cfg.population_size, cfg.elite_count

    pop = rng.uniform(low, high, size=(P, dim))
    fit = np.asarray(objective(pop), dtype=float)
    records: list[GenerationRecord] = []
    best_so_far = math.inf
    stall = 0
    stopped_by = "max_generations"
    G = cfg.max_generations
    for gen in range(G + 1):
        order = np.argsort(fit, kind="stable")
        best = float(fit[order[0]])
        records.append(GenerationRecord(
            gen, best, float(np.mean(fit)), tuple(pop[order[0]].tolist()),
            int(np.count_nonzero(fit >= DIVERGENCE_PENALTY)),
        ))
        if callback is not None:
            callback(records[-1])
        if best < best_so_far:
            best_so_far, stall = best, 0
        else:
            stall += 1
        if gen == G:
            break
        if stall >= cfg.stall_generations:
            stopped_by = "stall"
            break

        scale = cfg.mutation_stddev * (1.0 - cfg.mutation_shrink * gen / max(G, 1))
        children = np.empty((P - E, dim))
        for c in range(P - E):
            a = pop[_tournament(rng, fit, cfg.tournament_size)]
            if rng.random() < cfg.crossover_fraction:
                b = pop[_tournament(rng, fit, cfg.tournament_size)]
                lo, hi = np.minimum(a, b), np.maximum(a, b)
                span = cfg.blend_alpha * (hi - lo)
                children[c] = rng.uniform(lo - span, hi + span)
            else:
                children[c] = a + rng.normal(0.0, 1.0, size=dim) * (scale * width)
        child_fit = np.asarray(objective(children), dtype=float)
        pop = np.concatenate([pop[order[:E]], children])
        fit = np.concatenate([fit[order[:E]], child_fit])

    return records, np.asarray(records[-1].best_phi), stopped_by


OPTIMIZERS: dict[str, OuterOptimizer] = {"ga": genetic_algorithm}


def optimize(spec: LibrarySpec, sr: TimeSeriesDataset, ll: Sequence[TimeSeriesDataset],
             cfg: LomConfig = LomConfig(), optimizer: str = "ga",
             callback: Callable[[GenerationRecord], None] | None = None) -> OptimTrace:
    """Search ``phi`` minimizing the recursive loss, then refit at the optimum."""
    if spec.phi_dim < 1:
        raise ValueError("library has no tunable parameters; use a plain fit instead")
    evaluator = Evaluator(spec, sr, ll, cfg)

    def objective(pop):
        return np.array([r.j_ms for r in evaluator(pop)[1]])

    records, phi_star, stopped_by = OPTIMIZERS[optimizer](
        objective, spec.phi_dim, cfg.ga, callback)
    xi_star, report = evaluate_candidate(phi_star, spec, sr, ll, cfg)
    return OptimTrace(spec, records, phi_star, xi_star, report, evaluator.n_evaluations,
                      stopped_by)


@dataclass(frozen=True)
class Strategy:
    """One row of a strategy comparison.

    ``phi`` fixes the library parameters; ``optimize=True`` searches them
    instead (``phi`` is then ignored).
    """

    name: str
    spec: LibrarySpec
    phi: tuple[float, ...] = ()
    optimize: bool = False


@dataclass(frozen=True)
class ComparisonRow:
    strategy: str
    dataset: str
    component: int
    rlt_error: float | None
    diverged_at: int | None
    one_step_error: float
    true_norm: float
    next_norm: float
    n_samples: int

    @property
    def rlt_relative(self) -> float | None:
        return None if self.rlt_error is None else self.rlt_error / self.true_norm

    @property
    def one_step_relative(self) -> float:
        return self.one_step_error / self.next_norm

    @property
    def gap(self) -> float | None:
        if self.rlt_error is None:
            return math.inf
        return self.rlt_relative / self.one_step_relative if self.one_step_error else math.inf


@dataclass(eq=False)
class ComparisonReport:
    models: dict[str, SindyModel]
    losses: dict[str, LossReport]
    rows: list[ComparisonRow]
    traces: dict[str, OptimTrace]

    def table(self) -> str:
        lines = [f"{'strategy':<12}{'dataset':<14}{'comp':>5}{'||E_rlt||_2':>16}"
                 f"{'||E_os||_2':>14}{'rlt/true':>11}{'os/true':>11}{'gap':>9}"]
        for r in self.rows:
            rlt = "diverged" if r.rlt_error is None else f"{r.rlt_error:.5g}"
            rel = "-" if r.rlt_error is None else f"{r.rlt_relative:.4g}"
            gap = "inf" if r.rlt_error is None else f"{r.gap:.3g}"
            lines.append(f"{r.strategy:<12}{r.dataset:<14}{'x' + str(r.component):>5}{rlt:>16}"
                         f"{r.one_step_error:>14.5g}{rel:>11}{r.one_step_relative:>11.4g}"
                         f"{gap:>9}")
        lines.append("")
        for name, rep in self.losses.items():
            j = "penalty (diverged)" if rep.diverged else f"{rep.j_ms:.6g}"
            lines.append(f"{name:<12}J_ms = {j}   ||Xi||_0 = {rep.l0_count}")
        return "\n".join(lines)

    def write_table_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["strategy", "dataset", "component", "rlt_error_2norm", "diverged_at",
                        "one_step_error_2norm", "true_2norm", "rlt_relative",
                        "one_step_relative", "gap_ratio"])
            for r in self.rows:
                w.writerow([
                    r.strategy, r.dataset, f"x{r.component}",
                    "diverged" if r.rlt_error is None else "%.17g" % r.rlt_error,
                    "" if r.diverged_at is None else r.diverged_at,
                    "%.17g" % r.one_step_error, "%.17g" % r.true_norm,
                    "" if r.rlt_error is None else "%.17g" % r.rlt_relative,
                    "%.17g" % r.one_step_relative,
                    "inf" if r.rlt_error is None else "%.17g" % r.gap,
                ])

    def write_xi_csv(self, path) -> None:
        """Long-format coefficient patterns, one row per (strategy, basis)."""
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            n = next(iter(self.models.values())).spec.n_state
            w.writerow(["strategy", "index", "basis"] + [f"xi{j + 1}" for j in range(n)])
            for name, m in self.models.items():
                for i, basis in enumerate(m.spec.names()):
                    w.writerow([name, i + 1, basis] + ["%.17g" % v for v in m.Xi[i]])


def run_strategy_comparison(strategies: Sequence[Strategy], sr: TimeSeriesDataset,
                            ll: Sequence[TimeSeriesDataset], cfg: LomConfig = LomConfig(),
                            eval_datasets: Sequence[TimeSeriesDataset] | None = None,
                            ) -> ComparisonReport:
    """Fit or optimize each strategy on the same data and tabulate errors.

    Errors are reported on ``eval_datasets`` (default: ``sr`` plus ``ll``):
    the 2-norm of the recursive error per state component over
    ``k = 0..N-1`` (or the divergence step) next to the one-step error.
    """
    if not strategies:
        raise ValueError("no strategies given")
    if eval_datasets is None:
        seen, eval_datasets = set(), []
        for d in [sr, *ll]:
            if id(d) not in seen:
                seen.add(id(d))
                eval_datasets.append(d)
    sm = shifted(sr)
    models, losses, traces, rows = {}, {}, {}, []
    for s in strategies:
        if s.optimize:
            trace = optimize(s.spec, sr, ll, cfg)
            traces[s.name] = trace
            model = trace.model
        else:
            xi = fit(s.spec, sm, np.asarray(s.phi, dtype=float), cfg.stlsq)
            model = SindyModel(s.spec, s.phi, xi)
        models[s.name] = model
        losses[s.name] = j_ms_batch(model.spec, model.phi[None], model.Xi[None],
                                    list(eval_datasets), cfg.weights, cfg.bound,
                                    cfg.penalty)[0]
        for ds in eval_datasets:
            N = len(ds) - 1
            res = predict_rlt(model, ds, cfg.bound, horizon=N)
            X = ds.states[:N]
            try:
                os_err = one_step_errors(model, ds)
            except FloatingPointError:
                os_err = np.full(ds.n_state, math.inf)
            for j in range(ds.n_state):
                rlt = None if res.diverged else float(np.linalg.norm(res.trajectory[:, j] - X[:, j]))
                rows.append(ComparisonRow(
                    s.name, ds.name, j + 1, rlt, res.diverged_at, float(os_err[j]),
                    float(np.linalg.norm(X[:, j])), float(np.linalg.norm(ds.states[1:, j])), N,
                ))
    return ComparisonReport(models, losses, rows, traces)
