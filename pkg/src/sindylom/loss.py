"""One-step loss and the weighted multi-dataset recursive loss."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import TimeSeriesDataset
from .rollout import DEFAULT_BOUND, SindyModel, predict_one_step, rollout_batch
from .stlsq import CoefficientMatrix

DIVERGENCE_PENALTY = 1e12
DEFAULT_KAPPA = 8.0e-7


@dataclass(frozen=True)
class LossWeights:
    """Dataset weights ``q``, state-component weights ``r`` and the l0 weight.

    ``q`` / ``r`` left as ``None`` mean unit weights of whatever length the
    call needs.
    """

    q: tuple[float, ...] | None = None
    r: tuple[float, ...] | None = None
    kappa: float = DEFAULT_KAPPA

    def __post_init__(self):
        for label, v in (("q", self.q), ("r", self.r)):
            if v is not None:
                object.__setattr__(self, label, tuple(float(a) for a in v))
                if not all(a > 0 for a in getattr(self, label)):
                    raise ValueError(f"all {label} weights must be positive")
        if not self.kappa >= 0:
            raise ValueError("kappa must be non-negative")

    def resolve(self, n_datasets: int, n_state: int) -> tuple[np.ndarray, np.ndarray]:
        q = np.ones(n_datasets) if self.q is None else np.array(self.q)
        r = np.ones(n_state) if self.r is None else np.array(self.r)
        if q.size != n_datasets:
            raise ValueError(f"{q.size} q weights for {n_datasets} datasets")
        if r.size != n_state:
            raise ValueError(f"{r.size} r weights for {n_state} state components")
        return q, r


@dataclass(frozen=True)
class DatasetTerm:
    name: str
    term: float
    diverged: bool
    diverged_at: int | None = None
    row_errors: tuple[float, ...] = ()
    row_norms: tuple[float, ...] = ()


@dataclass(frozen=True)
class LossReport:
    j_ms: float
    per_dataset: tuple[DatasetTerm, ...]
    l0_count: int
    penalty: float
    kappa: float = DEFAULT_KAPPA

    @property
    def diverged(self) -> bool:
        return any(t.diverged for t in self.per_dataset)

    def to_dict(self) -> dict:
        return {
            "j_ms": self.j_ms,
            "l0_count": self.l0_count,
            "kappa": self.kappa,
            "penalty": self.penalty,
            "diverged": self.diverged,
            "per_dataset": [
                {
                    "name": t.name,
                    "term": t.term,
                    "diverged": t.diverged,
                    "diverged_at": t.diverged_at,
                    "rlt_error_2norm": list(t.row_errors),
                    "true_2norm": list(t.row_norms),
                }
                for t in self.per_dataset
            ],
        }

    def format(self) -> str:
        lines = [f"J_ms        = {self.j_ms:.10g}",
                 f"||Xi||_0    = {self.l0_count}",
                 f"kappa*l0    = {self.penalty:.10g}"]
        for t in self.per_dataset:
            if t.diverged:
                lines.append(f"  {t.name}: diverged at step {t.diverged_at}")
            else:
                errs = ", ".join(f"{e:.6g}" for e in t.row_errors)
                lines.append(f"  {t.name}: term = {t.term:.6g}  |E_j|_2 = [{errs}]")
        return "\n".join(lines)


def l0_norm(xi: CoefficientMatrix | np.ndarray) -> int:
    Xi = xi.Xi if isinstance(xi, CoefficientMatrix) else np.asarray(xi)
    return int(np.count_nonzero(Xi))


def one_step_errors(model: SindyModel, ds: TimeSeriesDataset) -> np.ndarray:
    """Row-wise 2-norms of the one-step error, one entry per state component."""
    pred = predict_one_step(model, ds)
    if not np.isfinite(pred).all():
        raise FloatingPointError(f"one-step prediction on {ds.name!r} is non-finite")
    err = pred - ds.states[1:]
    return np.array([np.linalg.norm(err[:, j]) for j in range(ds.n_state)])


def j_os(model: SindyModel, ds: TimeSeriesDataset) -> float:
    """Sum over state components of the one-step error row norms."""
    total = 0.0
    for e in one_step_errors(model, ds):
        total += e
    return float(total)


def _true_row_norms(ds: TimeSeriesDataset) -> np.ndarray:
    X = ds.states[:-1]
    norms = np.array([np.linalg.norm(X[:, j]) for j in range(ds.n_state)])
    for j, v in enumerate(norms):
        if v == 0.0:
            raise ValueError(
                f"dataset {ds.name!r}: state component x{j + 1} has zero 2-norm; "
                "the normalized loss is undefined"
            )
    return norms


def j_ms_batch(spec, phis, Xis, ll_datasets, weights: LossWeights,
               bound: float = DEFAULT_BOUND,
               penalty_value: float = DIVERGENCE_PENALTY) -> list[LossReport]:
    """Recursive loss for ``B`` candidates at once.

    Each candidate is rolled out over ``x_hat(0..N_i-1)`` of every dataset
    and scored against the true states on the same indices.
    """
    Xis = np.asarray(Xis, dtype=float)
    B = Xis.shape[0]
    if not ll_datasets:
        raise ValueError("at least one long-term dataset is required")
    q, r = weights.resolve(len(ll_datasets), spec.n_state)
    QR = q.sum() * r.sum()
    norms = [_true_row_norms(ds) for ds in ll_datasets]
    l0 = [int(np.count_nonzero(Xis[b])) for b in range(B)]

    terms: list[list[DatasetTerm]] = [[] for _ in range(B)]
    for ds, nrm in zip(ll_datasets, norms):
        N = len(ds) - 1
        traj, div = rollout_batch(spec, phis, Xis, ds.states[0], ds.inputs, N, bound)
        X = ds.states[:N]
        for b in range(B):
            if div[b] >= 0:
                terms[b].append(DatasetTerm(ds.name, math.nan, True, int(div[b]),
                                            row_norms=tuple(nrm.tolist())))
                continue
            E = traj[b] - X
            errs = [float(np.linalg.norm(E[:, j])) for j in range(spec.n_state)]
            s = 0.0
            for j in range(spec.n_state):
                s += r[j] * errs[j] / nrm[j]
            terms[b].append(DatasetTerm(ds.name, s / math.sqrt(N), False, None,
                                        tuple(errs), tuple(nrm.tolist())))

    reports = []
    for b in range(B):
        pen = weights.kappa * l0[b]
        if any(t.diverged for t in terms[b]):
            j = float(penalty_value)
        else:
            acc = 0.0
            for qi, t in zip(q, terms[b]):
                acc += qi * t.term
            j = acc / QR + pen
        reports.append(LossReport(j, tuple(terms[b]), l0[b], pen, weights.kappa))
    return reports


def j_ms(model: SindyModel, ll_datasets, weights: LossWeights = LossWeights(),
         bound: float = DEFAULT_BOUND,
         penalty_value: float = DIVERGENCE_PENALTY) -> LossReport:
    """Weighted, normalized recursive loss plus ``kappa * ||Xi||_0``.

    Any diverging rollout replaces the whole value by ``penalty_value``.
    """
    return j_ms_batch(model.spec, model.phi[None, :], model.Xi[None], ll_datasets,
                      weights, bound, penalty_value)[0]
