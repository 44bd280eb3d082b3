import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from sindylom.dataset import TimeSeriesDataset, shifted
from sindylom.library import (
    SIGMA_FLOOR, BasisDescriptor, LibrarySpec, append_rbfs, build_matrix, combine,
    eval_row, evaluate, polynomial_library,
)

small = st.floats(-5, 5, allow_nan=False)


def test_published_listing():
    spec = polynomial_library(2, 4, 2)
    assert spec.p == 28
    assert tuple(spec.names()) == oracles.PUBLISHED_THETA_1_28
    assert spec.names()[1] == "x1" and spec.names()[27] == "w4^2"


def test_published_library_size():
    spec = append_rbfs(polynomial_library(2, 4, 2), 5)
    assert spec.p == oracles.PUBLISHED_P_WITH_5_RBFS
    assert spec.phi_dim == oracles.PUBLISHED_PHI_DIM
    slots = sorted(s for d in spec.descriptors for s in d.slots)
    assert slots == list(range(spec.phi_dim))


def test_small_libraries():
    assert polynomial_library(1, 0, 1).names() == ["1", "x1"]
    assert polynomial_library(2, 1, 2).p == oracles.POLY_TERMS_N2_M1_D2
    assert append_rbfs(polynomial_library(1, 0, 1), 1).phi_dim == 2
    spec = append_rbfs(polynomial_library(1, 1, 2), 2, over=(0,))
    assert spec.phi_dim == 4 and spec.n_rbf == 2
    assert spec.names()[-2:] == ["rbf1(x1)", "rbf2(x1)"]


def test_bad_specs():
    with pytest.raises(ValueError):
        LibrarySpec((), 1, 0)
    with pytest.raises(ValueError):
        LibrarySpec((BasisDescriptor("rbf", over=(0,), center_slots=(0,), scale_slots=(2,)),), 1, 0)
    with pytest.raises(ValueError):
        append_rbfs(polynomial_library(1, 0), 1, over=(3,))
    with pytest.raises(ValueError):
        append_rbfs(polynomial_library(1, 0), 0)


def test_scalar_values():
    spec = append_rbfs(LibrarySpec((BasisDescriptor("constant"),), 1, 0), 1)
    assert eval_row(spec, [3.7], [], [0.0, 1.0])[0] == 1.0
    assert eval_row(spec, [0.4], [], [0.4, 0.9])[1] == 1.0
    assert eval_row(spec, [1.5], [], [0.5, 2.0])[1] == oracles.RBF_UNIT_OFFSET_SIGMA2


def test_sigma_floor():
    spec = append_rbfs(polynomial_library(1, 0, 0), 1)
    v = eval_row(spec, [SIGMA_FLOOR], [], [0.0, 0.0])[1]
    assert v == pytest.approx(math.exp(-1.0))
    assert eval_row(spec, [1.0], [], [0.0, 0.0])[1] == 0.0


def test_build_matrix_rows_and_constant_only():
    rng = np.random.default_rng(0)
    ds = TimeSeriesDataset(rng.normal(size=(4, 2)), rng.normal(size=(4, 1)))
    sm = shifted(ds)
    ones = build_matrix(LibrarySpec((BasisDescriptor("constant"),), 2, 1), sm, [])
    assert ones.shape == (3, 1) and (ones == 1).all()
    spec = append_rbfs(polynomial_library(2, 1), 2)
    phi = rng.normal(size=spec.phi_dim)
    T = build_matrix(spec, sm, phi)
    for k in range(3):
        assert np.array_equal(T[k], eval_row(spec, ds.states[k], ds.inputs[k], phi))


def test_polynomial_columns_ignore_phi():
    rng = np.random.default_rng(1)
    ds = TimeSeriesDataset(rng.normal(size=(50, 2)), rng.normal(size=(50, 4)))
    spec = append_rbfs(polynomial_library(2, 4), 5)
    a = build_matrix(spec, shifted(ds), rng.normal(size=60))
    b = build_matrix(spec, shifted(ds), rng.normal(size=60) + 0.5)
    assert np.array_equal(a[:, :28], b[:, :28])
    for c in range(28, 33):
        assert not np.array_equal(a[:, c], b[:, c])


@given(st.lists(small, min_size=2, max_size=2), st.lists(small, min_size=4, max_size=4),
       st.integers(0, 3))
def test_rbf_range_and_sign_invariance(u, phi, flip):
    spec = append_rbfs(polynomial_library(2, 0, 0), 1)
    v = eval_row(spec, u, [], phi)[1]
    assert 0.0 <= v <= 1.0
    flipped = list(phi)
    flipped[2 + flip % 2] = -flipped[2 + flip % 2]
    assert eval_row(spec, u, [], flipped)[1] == v
    at_center = eval_row(spec, phi[:2], [], phi)[1]
    assert at_center == 1.0


def test_batched_evaluation_matches_rows():
    rng = np.random.default_rng(2)
    spec = append_rbfs(polynomial_library(2, 1), 2)
    U = rng.normal(size=(7, 3))
    phis = rng.normal(size=(7, spec.phi_dim))
    T = evaluate(spec, U, phis)
    for b in range(7):
        assert np.array_equal(T[b], eval_row(spec, U[b, :2], U[b, 2:], phis[b]))


def test_combine_shapes_and_values():
    rng = np.random.default_rng(3)
    theta = rng.normal(size=(5, 4))
    Xi = rng.normal(size=(4, 2))
    np.testing.assert_allclose(combine(theta, Xi), theta @ Xi, rtol=1e-13)
    Xis = rng.normal(size=(5, 4, 2))
    out = combine(theta, Xis)
    for b in range(5):
        assert np.array_equal(out[b], combine(theta[b:b + 1], Xis[b])[0])
