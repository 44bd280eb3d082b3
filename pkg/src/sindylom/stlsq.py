"""Sequentially thresholded least squares (inner layer)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dataset import ShiftedMatrices
from .library import LibrarySpec, build_matrix

DEFAULT_LAMBDA = 8.0e-5


@dataclass(frozen=True)
class StlsqConfig:
    lam: float = DEFAULT_LAMBDA
    k_max: int = 10
    rank_tol: float = 1e-10

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if not 0 < self.rank_tol < 1:
            raise ValueError("rank_tol must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class CoefficientMatrix:
    """Sparse coefficients, one column per state component."""

    Xi: np.ndarray

    def __post_init__(self):
        Xi = np.array(self.Xi, dtype=float, copy=True)
        if Xi.ndim != 2:
            raise ValueError("Xi must be 2-D (p x n)")
        Xi.flags.writeable = False
        object.__setattr__(self, "Xi", Xi)

    @property
    def shape(self) -> tuple[int, int]:
        return self.Xi.shape

    @property
    def support(self) -> list[tuple[int, ...]]:
        return [tuple(np.flatnonzero(col)) for col in self.Xi.T]

    @property
    def l0(self) -> int:
        return int(np.count_nonzero(self.Xi))


@dataclass(frozen=True, eq=False)
class StlsqPath:
    """Outcome of one STLSQ solve together with its support history.

    ``supports[0]`` is the support after the initial unrestricted fit;
    ``supports[t]`` the support after restricted round ``t``.
    """

    coef: np.ndarray
    supports: list[frozenset[int]]
    n_iter: int
    converged: bool


def least_squares(A, b, rank_tol: float = 1e-10) -> np.ndarray:
    """Minimum-norm minimizer of ``||A v - b||_2``.

    Singular values below ``rank_tol * s_max`` are treated as zero, so a
    rank-deficient ``A`` yields the minimum-norm solution.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or b.shape != (A.shape[0],) or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError(f"incompatible shapes A{A.shape}, b{b.shape}")
    if not (np.isfinite(A).all() and np.isfinite(b).all()):
        raise ValueError("least squares input contains non-finite entries")
    return np.linalg.lstsq(A, b, rcond=rank_tol)[0]


def stlsq_path(Theta, target, cfg: StlsqConfig = StlsqConfig()) -> StlsqPath:
    Theta = np.asarray(Theta, dtype=float)
    target = np.asarray(target, dtype=float)
    if Theta.ndim != 2 or target.shape != (Theta.shape[0],):
        raise ValueError(f"dimension mismatch: Theta{Theta.shape}, target{target.shape}")
    p = Theta.shape[1]

    xi = least_squares(Theta, target, cfg.rank_tol)
    keep = np.abs(xi) >= cfg.lam
    xi[~keep] = 0.0
    supports = [frozenset(np.flatnonzero(keep).tolist())]
    n_iter = 0
    converged = False
    while n_iter < cfg.k_max:
        if not keep.any():
            converged = True
            break
        n_iter += 1
        xi = np.zeros(p)
        xi[keep] = least_squares(Theta[:, keep], target, cfg.rank_tol)
        new_keep = np.abs(xi) >= cfg.lam
        xi[~new_keep] = 0.0
        supports.append(frozenset(np.flatnonzero(new_keep).tolist()))
        if np.array_equal(new_keep, keep):
            converged = True
            break
        keep = new_keep
    return StlsqPath(coef=xi, supports=supports, n_iter=n_iter, converged=converged)


def stlsq_solve(Theta, target, cfg: StlsqConfig = StlsqConfig()) -> np.ndarray:
    """Sparse coefficient vector for one target column.

    Alternates least squares restricted to the current support with hard
    thresholding ``|xi_j| >= lam``; stops after ``k_max`` rounds or as soon
    as a round leaves the support unchanged.  An empty support gives the
    zero vector.
    """
    return stlsq_path(Theta, target, cfg).coef


Solver = Callable[[np.ndarray, np.ndarray, StlsqConfig], np.ndarray]

SOLVERS: dict[str, Solver] = {"stlsq": stlsq_solve}


def register_solver(name: str, solver: Solver) -> None:
    SOLVERS[name] = solver


def fit_theta(Theta: np.ndarray, sm: ShiftedMatrices, cfg: StlsqConfig,
              solver: str = "stlsq") -> CoefficientMatrix:
    solve = SOLVERS[solver]
    cols = [solve(Theta, sm.Xplus[j], cfg) for j in range(sm.Xplus.shape[0])]
    return CoefficientMatrix(np.column_stack(cols))


def fit(spec: LibrarySpec, sm: ShiftedMatrices, phi, cfg: StlsqConfig = StlsqConfig(),
        solver: str = "stlsq") -> CoefficientMatrix:
    """Regress ``x(k+1)`` on the library, one state component at a time."""
    if sm.X.shape[0] != spec.n_state:
        raise ValueError("state dimension of the data does not match the library")
    Theta = build_matrix(spec, sm, phi)
    if not np.isfinite(Theta).all():
        raise ValueError("library matrix contains non-finite entries")
    return fit_theta(Theta, sm, cfg, solver)
