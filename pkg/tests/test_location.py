import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rpcadpd.errors import ConfigError, ConvergenceError
from rpcadpd.location import (LocationEstimator, coordinatewise_mdpde, coordinatewise_median,
                              l1_median, l1_objective)


def test_l1_median_fixtures():
    np.testing.assert_array_equal(l1_median([[3.0, -1.0, 2.0]]), [3.0, -1.0, 2.0])
    X = np.array([[1.0, 0], [-1, 0], [0, 1], [0, -1]])
    np.testing.assert_allclose(l1_median(X), [0, 0], atol=1e-8)
    np.testing.assert_allclose(l1_median(np.array([[0.0], [1.0], [10.0]])), [1.0], atol=1e-8)


def test_l1_median_at_data_point():
    # a vertex that is itself optimal: the other points pull with total force < 1
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
    np.testing.assert_allclose(l1_median(X), [0, 0], atol=1e-10)


def test_l1_median_matches_direct_minimization(rng):
    from scipy.optimize import minimize
    X = rng.standard_normal((30, 4)) * [1, 2, 3, 4]
    m = l1_median(X, tol=1e-12, max_iter=5000)
    ref = minimize(lambda v: l1_objective(X, v), X.mean(axis=0), method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 40000, "maxfev": 40000}).x
    assert l1_objective(X, m) <= l1_objective(X, ref) + 1e-9
    np.testing.assert_allclose(m, ref, atol=1e-4)


def test_l1_median_equivariance(rng, ortho):
    X = rng.standard_normal((40, 5))
    m = l1_median(X, tol=1e-12, max_iter=5000)
    for _ in range(5):
        P = ortho(rng, 5)
        a, b = rng.uniform(0.2, 5), rng.standard_normal(5)
        Y = a * X @ P.T + b
        np.testing.assert_allclose(l1_median(Y, tol=1e-12, max_iter=5000), a * P @ m + b, atol=1e-6)


def test_l1_median_monotone(rng):
    X = rng.standard_normal((25, 3))
    X[:5] += 20
    tr = []
    l1_median(X, trace=tr)
    assert len(tr) > 2
    assert np.all(np.diff(tr) <= 1e-12)


def test_l1_median_breakdown(rng):
    n = 50
    for frac in (0.2, 0.4):
        X = rng.standard_normal((n, 3))
        X /= np.maximum(1, np.linalg.norm(X, axis=1))[:, None]
        k = int(frac * n)
        X[:k] = 1e6 * np.array([1.0, 0.0, 0.0]) + rng.standard_normal((k, 3))
        assert np.linalg.norm(l1_median(X)) < 1e3


def test_l1_median_convergence_error(rng):
    X = rng.standard_normal((20, 3))
    with pytest.raises(ConvergenceError) as exc:
        l1_median(X, tol=1e-300, max_iter=3)
    assert exc.value.last is not None and exc.value.last.shape == (3,)


def test_coordinatewise_median_examples(rng):
    assert coordinatewise_median([[1.0], [2.0], [3.0]])[0] == 2.0
    assert coordinatewise_median([[1.0], [2.0], [3.0], [100.0]])[0] == 2.5
    X = rng.standard_normal((11, 4))
    np.testing.assert_array_equal(coordinatewise_median(X[rng.permutation(11)]), coordinatewise_median(X))


def test_mdpde_examples():
    assert coordinatewise_mdpde([[4.0], [4.0], [4.0]], 0.5)[0] == 4.0
    assert coordinatewise_mdpde([[-2.0], [2.0]], 0.5)[0] == pytest.approx(0.0, abs=1e-12)


def test_mdpde_small_alpha_is_mean():
    x = np.random.default_rng(3).standard_normal((1000, 1))
    assert abs(coordinatewise_mdpde(x, 1e-9, tol=1e-14)[0] - x.mean()) < 1e-6


def test_mdpde_resists_outliers(rng):
    x = rng.standard_normal((200, 2))
    x[:20] += 50
    est = coordinatewise_mdpde(x, 0.5)
    assert np.all(np.abs(est) < 0.3)
    assert np.all(x.mean(axis=0) > 4)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=3, max_size=30), st.floats(0.05, 1.0))
def test_mdpde_inside_data_range(xs, alpha):
    x = np.array(xs)[:, None]
    m = coordinatewise_mdpde(x, alpha)[0]
    assert x.min() - 1e-9 <= m <= x.max() + 1e-9


def test_estimator_object():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    assert LocationEstimator("median")(X).tolist() == [1.0, 1.0]
    np.testing.assert_allclose(LocationEstimator()(X), [1.0, 1.0], atol=1e-8)
    with pytest.raises(ConfigError):
        LocationEstimator("huber")
    with pytest.raises(ConfigError):
        LocationEstimator("mdpde", alpha=2.0)
