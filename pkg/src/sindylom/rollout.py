"""One-step and recursive long-term prediction of identified models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import TimeSeriesDataset
from .library import LibrarySpec, combine, evaluate
from .stlsq import CoefficientMatrix

DEFAULT_BOUND = 1e8


class DivergenceError(FloatingPointError):
    pass


@dataclass(frozen=True, eq=False)
class SindyModel:
    """``x(k+1) = (Theta(x(k), w(k); phi) Xi)^T``."""

    spec: LibrarySpec
    phi: np.ndarray
    xi: CoefficientMatrix

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float, copy=True).reshape(-1)
        if phi.size != self.spec.phi_dim:
            raise ValueError(f"phi has {phi.size} entries, library needs {self.spec.phi_dim}")
        phi.flags.writeable = False
        object.__setattr__(self, "phi", phi)
        xi = self.xi if isinstance(self.xi, CoefficientMatrix) else CoefficientMatrix(self.xi)
        if xi.shape != (self.spec.p, self.spec.n_state):
            raise ValueError(
                f"Xi has shape {xi.shape}, expected ({self.spec.p}, {self.spec.n_state})"
            )
        object.__setattr__(self, "xi", xi)

    @property
    def Xi(self) -> np.ndarray:
        return self.xi.Xi


@dataclass(frozen=True, eq=False)
class RolloutResult:
    """Predicted states ``x_hat(0..)``.

    When ``diverged`` is set, ``trajectory`` holds the finite, in-bound
    entries ``0..diverged_at-1`` only.
    """

    trajectory: np.ndarray
    diverged: bool = False
    diverged_at: int | None = None


def step(model: SindyModel, x, w) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    w = np.asarray(w, dtype=float).reshape(-1)
    if x.size != model.spec.n_state or w.size != model.spec.m_input:
        raise ValueError("x / w dimensions do not match the model")
    u = np.concatenate([x, w])[None, :]
    if not np.isfinite(u).all():
        raise ValueError("non-finite input to step")
    with np.errstate(over="ignore", invalid="ignore"):
        out = combine(evaluate(model.spec, u, model.phi), model.Xi)[0]
    if not np.isfinite(out).all():
        raise DivergenceError("model step produced a non-finite state")
    return out


def predict_one_step(model: SindyModel, ds: TimeSeriesDataset) -> np.ndarray:
    """Predictions of ``x(1..N)`` from the true samples ``x(0..N-1)``.

    Returns an ``(N, n_state)`` array; rows where the model blew up are
    left non-finite so callers can flag them.
    """
    if len(ds) < 2:
        raise ValueError("dataset too short for one-step prediction")
    U = np.concatenate([ds.states[:-1], ds.inputs[:-1]], axis=1)
    with np.errstate(over="ignore", invalid="ignore"):
        return combine(evaluate(model.spec, U, model.phi), model.Xi)


def rollout_batch(spec: LibrarySpec, phis, Xis, x0, inputs, horizon: int,
                  bound: float = DEFAULT_BOUND):
    """Roll ``B`` candidate models forward from a shared initial state.

    Parameters
    ----------
    phis : (B, phi_dim)
    Xis : (B, p, n)
    x0 : (n,)
    inputs : (>= horizon - 1, m) true exogenous inputs
    horizon : number of predicted entries, ``x_hat(0..horizon-1)``

    Returns
    -------
    traj : (B, horizon, n) with zeros after divergence
    diverged_at : (B,) int, -1 where no divergence occurred
    """
    phis = np.asarray(phis, dtype=float)
    Xis = np.asarray(Xis, dtype=float)
    B = Xis.shape[0]
    n = spec.n_state
    traj = np.zeros((B, horizon, n))
    diverged_at = np.full(B, -1, dtype=int)
    x = np.broadcast_to(np.asarray(x0, dtype=float), (B, n)).copy()
    alive = np.ones(B, dtype=bool)

    def check(k, x):
        bad = alive & ~(np.isfinite(x).all(axis=1) & (np.abs(x).max(axis=1) <= bound))
        if bad.any():
            diverged_at[bad] = k
            alive[bad] = False
            x[bad] = 0.0

    check(0, x)
    traj[:, 0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(horizon - 1):
            if not alive.any():
                break
            w = np.broadcast_to(inputs[k], (B, spec.m_input))
            x = combine(evaluate(spec, np.concatenate([x, w], axis=1), phis), Xis)
            check(k + 1, x)
            x[~alive] = 0.0
            traj[:, k + 1] = x
    return traj, diverged_at


def predict_rlt(model: SindyModel, ds: TimeSeriesDataset, bound: float = DEFAULT_BOUND,
                horizon: int | None = None) -> RolloutResult:
    """Recursive prediction from ``x_hat(0) = x(0)`` with the true inputs.

    Stops at the first step whose state is non-finite or exceeds ``bound``
    in the infinity norm.  ``horizon`` defaults to the dataset length.
    """
    horizon = len(ds) if horizon is None else int(horizon)
    if not 1 <= horizon <= len(ds):
        raise ValueError(f"horizon must lie in [1, {len(ds)}]")
    traj, div = rollout_batch(
        model.spec, model.phi[None, :], model.Xi[None], ds.states[0], ds.inputs,
        horizon, bound,
    )
    if div[0] >= 0:
        k = int(div[0])
        return RolloutResult(traj[0, :k].copy(), True, k)
    return RolloutResult(traj[0], False, None)
