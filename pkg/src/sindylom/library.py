"""Candidate basis functions and the (partially) parametrized library.

A library is an ordered list of descriptors; the order fixes the column
order of the regression matrix.  Polynomial terms never depend on the
parameter vector ``phi``; each Gaussian RBF owns a disjoint block of
``phi`` slots holding its center followed by its scale.

Every column is computed with elementwise array operations only, so a
single sample evaluated on its own yields exactly the same bits as the
same sample inside a large batch.  The rollout and one-step paths rely on
that.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .dataset import ShiftedMatrices

SIGMA_FLOOR = 1e-12

CONSTANT = "constant"
MONOMIAL = "monomial"
RBF = "rbf"


@dataclass(frozen=True)
class BasisDescriptor:
    kind: str
    exponents: tuple[int, ...] = ()
    over: tuple[int, ...] = ()
    center_slots: tuple[int, ...] = ()
    scale_slots: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in (CONSTANT, MONOMIAL, RBF):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.kind == MONOMIAL and any(int(e) != e or e < 0 for e in self.exponents):
            raise ValueError("monomial exponents must be non-negative integers")
        if self.kind == RBF and not (
            len(self.over) == len(self.center_slots) == len(self.scale_slots) > 0
        ):
            raise ValueError("rbf needs one center and one scale slot per variable")

    @property
    def factors(self) -> tuple[int, ...]:
        """Variable indices of a monomial, repeated by exponent, ascending."""
        return tuple(i for i, e in enumerate(self.exponents) for _ in range(e))

    @property
    def slots(self) -> tuple[int, ...]:
        return self.center_slots + self.scale_slots


def _var_names(n_state: int, m_input: int) -> list[str]:
    return [f"x{i + 1}" for i in range(n_state)] + [f"w{j + 1}" for j in range(m_input)]


@dataclass(frozen=True)
class LibrarySpec:
    descriptors: tuple[BasisDescriptor, ...]
    n_state: int
    m_input: int
    phi_dim: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "descriptors", tuple(self.descriptors))
        if not self.descriptors:
            raise ValueError("a library needs at least one basis function")
        width = self.n_state + self.m_input
        slots: list[int] = []
        for d in self.descriptors:
            if d.kind == MONOMIAL and len(d.exponents) != width:
                raise ValueError(f"monomial exponent vector must have length {width}")
            if d.kind == RBF:
                if any(not 0 <= v < width for v in d.over):
                    raise ValueError("rbf variable index out of range")
                slots.extend(d.slots)
        if sorted(slots) != list(range(len(slots))):
            raise ValueError("rbf parameter slots must partition [0, phi_dim)")
        object.__setattr__(self, "phi_dim", len(slots))

    @property
    def p(self) -> int:
        return len(self.descriptors)

    @property
    def n_rbf(self) -> int:
        return sum(d.kind == RBF for d in self.descriptors)

    def names(self) -> list[str]:
        var = _var_names(self.n_state, self.m_input)
        out = []
        k = 0
        for d in self.descriptors:
            if d.kind == CONSTANT:
                out.append("1")
            elif d.kind == MONOMIAL:
                parts = [
                    var[i] if e == 1 else f"{var[i]}^{e}"
                    for i, e in enumerate(d.exponents)
                    if e
                ]
                out.append("*".join(parts) if parts else "1")
            else:
                k += 1
                out.append(f"rbf{k}({','.join(var[i] for i in d.over)})")
        return out

    def rbf_blocks(self, phi) -> list[tuple[np.ndarray, np.ndarray]]:
        """(center, scale) pairs for each RBF, in library order."""
        phi = np.asarray(phi, dtype=float)
        return [
            (phi[list(d.center_slots)], phi[list(d.scale_slots)])
            for d in self.descriptors
            if d.kind == RBF
        ]


def polynomial_library(n_state: int, m_input: int, degree: int = 2) -> LibrarySpec:
    """Constant plus every monomial in ``(x, w)`` up to ``degree``.

    Within each degree the terms follow lexicographic order over the
    variables ``x1..xn, w1..wm``; for n=2, m=4, degree=2 this is the usual
    28-term list ending in ``w4^2``.
    """
    if degree < 0:
        raise ValueError("degree must be non-negative")
    width = n_state + m_input
    descs = [BasisDescriptor(CONSTANT)]
    for deg in range(1, degree + 1):
        for combo in combinations_with_replacement(range(width), deg):
            exps = [0] * width
            for i in combo:
                exps[i] += 1
            descs.append(BasisDescriptor(MONOMIAL, exponents=tuple(exps)))
    return LibrarySpec(tuple(descs), n_state, m_input)


def append_rbfs(spec: LibrarySpec, count: int, over=None) -> LibrarySpec:
    """Append ``count`` Gaussian RBFs, each claiming fresh center/scale slots.

    ``over`` restricts the RBFs to a subset of the stacked ``(x, w)``
    variables; by default they act on all ``n_state + m_input`` of them.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    width = spec.n_state + spec.m_input
    over = tuple(range(width)) if over is None else tuple(int(v) for v in over)
    if not over or any(not 0 <= v < width for v in over):
        raise ValueError(f"rbf variables must be a non-empty subset of range({width})")
    descs = list(spec.descriptors)
    nxt = spec.phi_dim
    k = len(over)
    for _ in range(count):
        descs.append(
            BasisDescriptor(
                RBF,
                over=over,
                center_slots=tuple(range(nxt, nxt + k)),
                scale_slots=tuple(range(nxt + k, nxt + 2 * k)),
            )
        )
        nxt += 2 * k
    return LibrarySpec(tuple(descs), spec.n_state, spec.m_input)


def evaluate(spec: LibrarySpec, U, phi) -> np.ndarray:
    """Evaluate the library on stacked samples.

    Parameters
    ----------
    U : array, shape (B, n_state + m_input)
        One ``(x, w)`` sample per row.
    phi : array, shape (phi_dim,) or (B, phi_dim)
        Shared parameters or one parameter vector per row.

    Returns
    -------
    array, shape (B, p)
    """
    U = np.asarray(U, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if U.ndim != 2 or U.shape[1] != spec.n_state + spec.m_input:
        raise ValueError(
            f"samples must have shape (B, {spec.n_state + spec.m_input}), got {U.shape}"
        )
    if phi.shape[-1:] != (spec.phi_dim,) or phi.ndim > 2:
        raise ValueError(f"phi must have trailing dimension {spec.phi_dim}")
    B = U.shape[0]
    out = np.empty((B, spec.p))
    for j, d in enumerate(spec.descriptors):
        if d.kind == CONSTANT:
            out[:, j] = 1.0
        elif d.kind == MONOMIAL:
            f = d.factors
            if not f:
                out[:, j] = 1.0
                continue
            col = U[:, f[0]]
            for i in f[1:]:
                col = col * U[:, i]
            out[:, j] = col
        else:
            acc = np.zeros(B)
            for v, cs, ss in zip(d.over, d.center_slots, d.scale_slots):
                scale = np.maximum(np.abs(phi[..., ss]), SIGMA_FLOOR)
                z = (U[:, v] - phi[..., cs]) / scale
                acc = acc + z * z
            out[:, j] = np.exp(-acc)
    return out


def eval_row(spec: LibrarySpec, x, w, phi) -> np.ndarray:
    """Library row ``Theta(x, w; phi)`` for one sample, shape (p,)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    w = np.asarray(w, dtype=float).reshape(-1)
    if x.size != spec.n_state or w.size != spec.m_input:
        raise ValueError("x / w dimensions do not match the library")
    u = np.concatenate([x, w])
    if not np.isfinite(u).all():
        raise ValueError("non-finite sample")
    return evaluate(spec, u[None, :], phi)[0]


def build_matrix(spec: LibrarySpec, sm: ShiftedMatrices, phi) -> np.ndarray:
    """Stack library rows over ``x(0..N-1)``, ``w(0..N-1)``; shape (N, p).

    Overflowing entries come back as inf; callers decide how to handle them.
    """
    if sm.X.shape[0] != spec.n_state or sm.W.shape[0] != spec.m_input:
        raise ValueError("shifted matrices do not match library dimensions")
    U = np.concatenate([sm.X, sm.W], axis=0).T
    with np.errstate(over="ignore", invalid="ignore"):
        return evaluate(spec, U, phi)


def combine(theta: np.ndarray, Xi: np.ndarray) -> np.ndarray:
    """``theta @ Xi`` accumulated term by term in library order.

    ``theta`` is (B, p); ``Xi`` is (p, n) or per-row (B, p, n).  A fixed
    summation order keeps results independent of batch size, unlike BLAS.
    """
    B, p = theta.shape
    n = Xi.shape[-1]
    out = np.zeros((B, n))
    if Xi.ndim == 2:
        for i in range(p):
            out = out + theta[:, i, None] * Xi[i]
    else:
        for i in range(p):
            out = out + theta[:, i, None] * Xi[:, i, :]
    return out
