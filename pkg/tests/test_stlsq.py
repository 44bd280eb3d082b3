import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from stlsq_checks import check_instance, random_instance
from sindylom.dataset import TimeSeriesDataset, shifted
from sindylom.library import append_rbfs, polynomial_library
from sindylom.stlsq import (
    DEFAULT_LAMBDA, SOLVERS, CoefficientMatrix, StlsqConfig, fit, least_squares,
    register_solver, stlsq_path, stlsq_solve,
)


def test_default_lambda():
    assert DEFAULT_LAMBDA == oracles.PUBLISHED_LAMBDA
    assert StlsqConfig().lam == oracles.PUBLISHED_LAMBDA
    assert StlsqConfig().k_max == 10


@pytest.mark.parametrize("kw", [{"lam": 0}, {"lam": -1}, {"k_max": 0}, {"rank_tol": 0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        StlsqConfig(**kw)


def test_least_squares_small():
    assert least_squares(np.eye(2), [3.0, 4.0]).tolist() == [3.0, 4.0]
    assert least_squares([[1.0], [1.0]], [1.0, 3.0]) == pytest.approx([2.0], abs=1e-15)


def test_least_squares_residual_orthogonal():
    rng = np.random.default_rng(5)
    A = rng.normal(size=(50, 5))
    b = rng.normal(size=50)
    r = b - A @ least_squares(A, b)
    assert np.linalg.norm(A.T @ r) <= 1e-8 * np.linalg.norm(A) * np.linalg.norm(b)


def test_least_squares_min_norm_on_rank_deficiency():
    A = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    v = least_squares(A, A @ [1.0, 0.0])
    np.testing.assert_allclose(v, [0.5, 0.5], atol=1e-14)


def test_least_squares_rejects_bad_input():
    with pytest.raises(ValueError):
        least_squares(np.eye(2), [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        least_squares([[np.inf]], [1.0])


def test_single_true_column():
    rng = np.random.default_rng(6)
    Theta = rng.normal(size=(100, 6))
    xi = stlsq_solve(Theta, 0.7 * Theta[:, 3])
    assert np.flatnonzero(xi).tolist() == [3]
    assert xi[3] == pytest.approx(0.7, abs=1e-10)


def test_zero_target():
    Theta = np.random.default_rng(7).normal(size=(20, 4))
    path = stlsq_path(Theta, np.zeros(20))
    assert not path.coef.any() and path.converged


def test_threshold_is_inclusive_and_signed_by_magnitude():
    Theta = np.eye(3)
    xi = stlsq_solve(Theta, np.array([0.5, -0.5, 0.1]), StlsqConfig(lam=0.5))
    assert xi.tolist() == [0.5, -0.5, 0.0]


def test_recovery_of_linear_decay():
    x = 0.9 ** np.arange(201)
    ds = TimeSeriesDataset(x[:, None], np.zeros((201, 0)))
    xi = fit(polynomial_library(1, 0, 1), shifted(ds), [])
    assert xi.support == [(1,)]
    assert xi.Xi[1, 0] == pytest.approx(0.9, abs=1e-9)


def test_columns_fit_independently():
    rng = np.random.default_rng(8)
    w = rng.uniform(-1, 1, size=300)
    X = np.zeros((300, 2))
    for k in range(299):
        X[k + 1] = [0.8 * X[k, 0] + w[k], 0.3 * X[k, 1] - 0.5 * w[k]]
    spec = polynomial_library(2, 1, 2)
    a = fit(spec, shifted(TimeSeriesDataset(X, w[:, None])), [])
    b = fit(spec, shifted(TimeSeriesDataset(X[:, ::-1], w[:, None])), [])
    names = spec.names()
    assert a.l0 == b.l0 == 4
    assert a.Xi[names.index("x1"), 0] == pytest.approx(0.8)
    assert b.Xi[names.index("x2"), 1] == pytest.approx(0.8)
    assert a.Xi[names.index("x2"), 1] == pytest.approx(0.3)
    assert b.Xi[names.index("x1"), 0] == pytest.approx(0.3)


def test_published_library_shape():
    rng = np.random.default_rng(9)
    ds = TimeSeriesDataset(rng.normal(size=(200, 2)), rng.normal(size=(200, 4)))
    spec = append_rbfs(polynomial_library(2, 4), 5)
    xi = fit(spec, shifted(ds), rng.normal(size=60) * 2)
    assert xi.shape == (33, 2)


def test_fit_rejects_mismatch_and_nonfinite():
    ds = TimeSeriesDataset(np.ones((5, 1)), np.zeros((5, 0)))
    with pytest.raises(ValueError):
        fit(polynomial_library(2, 0), shifted(ds), [])
    ds = TimeSeriesDataset(np.full((5, 1), 1e200), np.zeros((5, 0)))
    with pytest.raises(ValueError):
        fit(polynomial_library(1, 0, 2), shifted(ds), [])


def test_coefficient_matrix():
    c = CoefficientMatrix(np.array([[0.0, 1.0], [2.0, 0.0], [3.0, 0.0]]))
    assert c.support == [(1, 2), (0,)]
    assert c.l0 == 3
    with pytest.raises(ValueError):
        c.Xi[0, 0] = 1.0


def test_solver_registry():
    register_solver("dense", lambda T, b, cfg: least_squares(T, b, cfg.rank_tol))
    try:
        rng = np.random.default_rng(10)
        ds = TimeSeriesDataset(rng.normal(size=(30, 1)), rng.normal(size=(30, 1)))
        xi = fit(polynomial_library(1, 1), shifted(ds), [], solver="dense")
        assert xi.l0 == 6
    finally:
        SOLVERS.pop("dense")


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_structural_properties(seed):
    assert check_instance(*random_instance(np.random.default_rng(seed))) == []


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_noise_free_identifiability(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(2, 20))
    Theta = rng.normal(size=(200, p))
    lam = 0.01
    support = rng.random(p) < 0.5
    xi = np.where(support, rng.choice([-1, 1], size=p) * rng.uniform(2 * lam, 3, size=p), 0.0)
    got = stlsq_solve(Theta, Theta @ xi, StlsqConfig(lam=lam))
    assert np.array_equal(got != 0, support)
