"""Synthetic discrete-time plants with known sparse ground truth.

Every built-in plant is exactly representable in a polynomial (+ RBF)
library, so identification results can be checked against the truth.
Dynamics evolve on clean states; observation noise is added afterwards.

P1  linear two-state plant, three active terms
P2  quadratic coupled plant using ``x1*x2`` and ``w1^2``
P3  scalar plant with a Gaussian bump no finite polynomial captures
P4  near-unit-root scalar plant with a weak Gaussian bump; small one-step
    errors compound over long rollouts
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dataset import TimeSeriesDataset
from .library import LibrarySpec, append_rbfs, polynomial_library
from .rollout import DEFAULT_BOUND, DivergenceError, SindyModel, step
from .stlsq import CoefficientMatrix


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExcitationSpec:
    """Exogenous input generator.

    ``kind`` is one of ``steps`` (piecewise-constant random levels held for
    ``hold`` samples), ``sines`` (sum of ``n_sines`` random sinusoids) or
    ``chirp``; a tuple gives one kind per input.  All signals stay inside
    ``[low, high]``.
    """

    kind: str | tuple[str, ...] = "steps"
    low: float = -1.0
    high: float = 1.0
    hold: int = 20
    n_sines: int = 3
    seed: int | None = None

    def kinds(self, m: int) -> tuple[str, ...]:
        kinds = (self.kind,) * m if isinstance(self.kind, str) else tuple(self.kind)
        if len(kinds) != m:
            raise ValueError(f"{len(kinds)} excitation kinds for {m} inputs")
        return kinds

    def generate(self, m: int, length: int, rng: np.random.Generator) -> np.ndarray:
        if self.seed is not None:
            rng = np.random.default_rng(self.seed)
        lo, hi = float(self.low), float(self.high)
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        k = np.arange(length)
        cols = []
        for kind in self.kinds(m):
            if kind == "steps":
                n_levels = -(-length // self.hold)
                levels = rng.uniform(lo, hi, size=n_levels)
                col = np.repeat(levels, self.hold)[:length]
            elif kind == "sines":
                freqs = rng.uniform(0.002, 0.05, size=self.n_sines)
                phases = rng.uniform(0, 2 * np.pi, size=self.n_sines)
                s = sum(np.sin(2 * np.pi * f * k + ph) for f, ph in zip(freqs, phases))
                col = mid + half * s / self.n_sines
            elif kind == "chirp":
                f0, f1 = 0.001, 0.05
                phase = 2 * np.pi * (f0 * k + 0.5 * (f1 - f0) * k**2 / max(length, 1))
                col = mid + half * np.sin(phase)
            else:
                raise ValueError(f"unknown excitation kind {kind!r}")
            cols.append(np.clip(col, lo, hi))
        return np.column_stack(cols) if cols else np.zeros((length, 0))


@dataclass(frozen=True, eq=False)
class SyntheticPlant:
    name: str
    description: str
    true_model: SindyModel
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    x0: tuple[float, ...]
    excitation: ExcitationSpec = field(default_factory=ExcitationSpec)
    noise_stddev: float = 0.0

    @property
    def n_state(self) -> int:
        return self.true_model.spec.n_state

    @property
    def m_input(self) -> int:
        return self.true_model.spec.m_input

    def with_noise(self, stddev: float) -> "SyntheticPlant":
        return SyntheticPlant(self.name, self.description, self.true_model, self.f,
                              self.x0, self.excitation, float(stddev))


def simulate(plant: SyntheticPlant, excitation: ExcitationSpec | None = None, x0=None,
             N: int = 1000, seed: int = 0, name: str | None = None,
             bound: float = DEFAULT_BOUND) -> TimeSeriesDataset:
    """Generate samples ``k = 0..N`` of the plant under ``excitation``.

    The true model is stepped on clean states; Gaussian observation noise
    of ``plant.noise_stddev`` is added to the recorded states only.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    excitation = plant.excitation if excitation is None else excitation
    x0 = plant.x0 if x0 is None else x0
    exc_rng, noise_rng = (np.random.default_rng(s)
                          for s in np.random.SeedSequence(seed).spawn(2))
    W = excitation.generate(plant.m_input, N + 1, exc_rng)
    X = np.empty((N + 1, plant.n_state))
    X[0] = np.asarray(x0, dtype=float)
    for k in range(N):
        try:
            X[k + 1] = step(plant.true_model, X[k], W[k])
        except DivergenceError:
            raise SimulationError(f"{plant.name} diverged at step {k + 1}") from None
        if np.abs(X[k + 1]).max() > bound:
            raise SimulationError(f"{plant.name} left the bound at step {k + 1}")
    if plant.noise_stddev > 0:
        X = X + noise_rng.normal(0.0, plant.noise_stddev, size=X.shape)
    return TimeSeriesDataset(X, W, name=name or f"{plant.name}_s{seed}")


def _model(spec: LibrarySpec, phi, terms: dict[tuple[str, int], float]) -> SindyModel:
    names = spec.names()
    Xi = np.zeros((spec.p, spec.n_state))
    for (term, j), v in terms.items():
        Xi[names.index(term), j] = v
    return SindyModel(spec, phi, CoefficientMatrix(Xi))


def _gauss(x, mu, sigma):
    return math.exp(-(((x - mu) / sigma) ** 2))


P3_CENTER, P3_SCALE = 1.0, 0.4
P4_CENTER, P4_SCALE = 0.5, 0.3


def plant_p1() -> SyntheticPlant:
    spec = polynomial_library(2, 1, 2)
    model = _model(spec, [], {("x1", 0): 0.8, ("w1", 0): 0.5, ("x1", 1): 0.6})

    def f(x, w):
        return np.array([0.8 * x[0] + 0.5 * w[0], 0.6 * x[0]])

    return SyntheticPlant("P1", "linear 2-state stable plant", model, f, (0.0, 0.0))


def plant_p2() -> SyntheticPlant:
    spec = polynomial_library(2, 1, 2)
    model = _model(spec, [], {
        ("x1", 0): 0.7, ("x1*x2", 0): 0.1, ("w1", 0): 0.3,
        ("x2", 1): 0.5, ("w1^2", 1): 0.2,
    })

    def f(x, w):
        return np.array([0.7 * x[0] + 0.1 * x[0] * x[1] + 0.3 * w[0],
                         0.5 * x[1] + 0.2 * w[0] ** 2])

    return SyntheticPlant("P2", "quadratic coupled plant", model, f, (0.0, 0.0))


def rbf_library(n_state: int = 1, m_input: int = 1, degree: int = 2,
                count: int = 1, over=(0,)) -> LibrarySpec:
    return append_rbfs(polynomial_library(n_state, m_input, degree), count, over=over)


def plant_p3() -> SyntheticPlant:
    spec = rbf_library()
    model = _model(spec, [P3_CENTER, P3_SCALE],
                   {("x1", 0): 0.5, ("w1", 0): 0.5, ("rbf1(x1)", 0): 1.0})

    def f(x, w):
        return np.array([0.5 * x[0] + 1.0 * _gauss(x[0], P3_CENTER, P3_SCALE) + 0.5 * w[0]])

    return SyntheticPlant("P3", "scalar plant with a Gaussian bump", model, f, (0.0,),
                          ExcitationSpec("steps", -1.0, 2.0, 20))


def plant_p4() -> SyntheticPlant:
    spec = rbf_library()
    model = _model(spec, [P4_CENTER, P4_SCALE],
                   {("x1", 0): 0.98, ("w1", 0): 0.03, ("rbf1(x1)", 0): 0.01})

    def f(x, w):
        return np.array([0.98 * x[0] + 0.01 * _gauss(x[0], P4_CENTER, P4_SCALE) + 0.03 * w[0]])

    return SyntheticPlant("P4", "near-unit-root plant with a weak bump", model, f, (0.0,),
                          ExcitationSpec("steps", -1.0, 1.0, 50))


def builtin_plants() -> list[SyntheticPlant]:
    return [plant_p1(), plant_p2(), plant_p3(), plant_p4()]


def get_plant(name: str) -> SyntheticPlant:
    for p in builtin_plants():
        if p.name.lower() == name.lower():
            return p
    raise KeyError(f"unknown plant {name!r}; choose from P1, P2, P3, P4")
