"""Time-series containers, shifted regression views and CSV ingestion."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.17g"


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class TimeSeriesDataset:
    """Paired state / exogenous-input samples ``x(0..N)``, ``w(0..N)``.

    ``states`` has shape ``(N+1, n_state)`` and ``inputs`` has shape
    ``(N+1, m_input)``; ``m_input`` may be zero.  Time is the 0-based
    sample index.
    """

    states: np.ndarray
    inputs: np.ndarray
    name: str = "data"

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        inputs = np.asarray(self.inputs, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        if inputs.ndim == 1:
            inputs = inputs[:, None] if inputs.size else np.zeros((len(states), 0))
        if states.ndim != 2 or inputs.ndim != 2:
            raise ValueError("states and inputs must be 2-D (samples x components)")
        if states.shape[1] < 1:
            raise ValueError("n_state must be positive")
        if len(states) != len(inputs):
            raise ValueError(
                f"states ({len(states)}) and inputs ({len(inputs)}) differ in length"
            )
        if len(states) < 2:
            raise ValueError("a dataset needs at least 2 samples")
        if not (np.isfinite(states).all() and np.isfinite(inputs).all()):
            raise ValueError(f"dataset {self.name!r} contains non-finite values")
        object.__setattr__(self, "states", _frozen(states))
        object.__setattr__(self, "inputs", _frozen(inputs))

    @property
    def n_state(self) -> int:
        return self.states.shape[1]

    @property
    def m_input(self) -> int:
        return self.inputs.shape[1]

    def __len__(self) -> int:
        return len(self.states)

    def header(self) -> list[str]:
        return [f"x{i + 1}" for i in range(self.n_state)] + [
            f"w{j + 1}" for j in range(self.m_input)
        ]

    def renamed(self, name: str) -> "TimeSeriesDataset":
        return TimeSeriesDataset(self.states, self.inputs, name=name)


@dataclass(frozen=True, eq=False)
class ShiftedMatrices:
    """Column-per-sample regression views.

    ``X`` holds ``x(0..N-1)``, ``Xplus`` holds ``x(1..N)`` and ``W`` holds
    ``w(0..N-1)``, each with one column per sample.
    """

    X: np.ndarray
    Xplus: np.ndarray
    W: np.ndarray

    @property
    def n_samples(self) -> int:
        return self.X.shape[1]


def shifted(ds: TimeSeriesDataset) -> ShiftedMatrices:
    if len(ds) < 2:
        raise ValueError("dataset too short to form shifted matrices")
    return ShiftedMatrices(
        X=_frozen(ds.states[:-1].T),
        Xplus=_frozen(ds.states[1:].T),
        W=_frozen(ds.inputs[:-1].T),
    )


def load_csv(path, n_state: int, m_input: int, name: str | None = None) -> TimeSeriesDataset:
    """Read a dataset written one row per time step, states first.

    The header row is mandatory.  Any non-numeric or non-finite cell is
    rejected rather than repaired.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such dataset file: {path}")
    width = n_state + m_input
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if len(header) != width:
            raise ValueError(
                f"{path}: header has {len(header)} columns, expected {width} "
                f"({n_state} states + {m_input} inputs)"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ValueError(f"{path}:{lineno}: expected {width} columns, got {len(row)}")
            values = []
            for cell in row:
                try:
                    v = float(cell)
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: non-numeric cell {cell!r}") from None
                if not math.isfinite(v):
                    raise ValueError(f"{path}:{lineno}: non-finite cell {cell!r}")
                values.append(v)
            rows.append(values)
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least 2 data rows, found {len(rows)}")
    data = np.array(rows, dtype=float).reshape(len(rows), width)
    return TimeSeriesDataset(
        data[:, :n_state], data[:, n_state:], name=name or path.stem
    )


def save_csv(ds: TimeSeriesDataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ds.header())
        for x, w in zip(ds.states, ds.inputs):
            writer.writerow([FLOAT_FMT % v for v in x] + [FLOAT_FMT % v for v in w])


def infer_layout(path) -> tuple[int, int]:
    """Count ``x*`` and ``w*`` columns in a CSV header."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    n = sum(1 for h in header if h.strip().lower().startswith("x"))
    m = sum(1 for h in header if h.strip().lower().startswith("w"))
    if n == 0 or n + m != len(header):
        raise ValueError(
            f"{path}: cannot infer layout from header {header}; pass --n-state/--m-input"
        )
    return n, m
