import math

import numpy as np
import pytest

from fastmapsvm.svm import (
    GridSearchConfig,
    KernelSpec,
    decision_function,
    dual_objective,
    full_alpha,
    grid_search,
    kernel_eval,
    kkt_violations,
    predict_label,
    resolve_gamma,
    stratified_folds,
    train_svm,
)


def test_kernel_examples():
    rbf = KernelSpec("rbf", 0.5)
    assert kernel_eval(rbf, [0.3, -1.0], [0.3, -1.0]) == 1.0
    assert kernel_eval(KernelSpec("linear"), [1, 2], [3, 4]) == 11.0
    assert kernel_eval(rbf, [0, 0], [2, 0]) == pytest.approx(math.exp(-2), abs=1e-12)


def test_gamma_scale(rng):
    X = rng.standard_normal((30, 4)) * 3
    assert resolve_gamma("scale", X) == pytest.approx(1 / (4 * X.var()))
    assert resolve_gamma(0.2, X) == 0.2


def test_two_point_analytic():
    X = np.array([[-1.0], [1.0]])
    y = np.array([-1, 1])
    m = train_svm(X, y, C=1.0, kernel=KernelSpec("linear"))
    np.testing.assert_allclose(full_alpha(m, 2), [0.5, 0.5], atol=1e-6)
    assert abs(m.bias) < 1e-6
    assert abs(decision_function(m, [0.0])) < 1e-6
    assert decision_function(m, [2.0]) == pytest.approx(2.0, abs=1e-6)
    assert predict_label(m, X).tolist() == [-1, 1]


def test_xor_rbf():
    X = np.array([[0.0, 0], [1, 1], [1, 0], [0, 1]])
    y = np.array([-1, -1, 1, 1])
    m = train_svm(X, y, C=10, kernel=KernelSpec("rbf", 1.0))
    assert predict_label(m, X).tolist() == y.tolist()
    assert np.max(kkt_violations(m, X, y)) <= 1e-3


def test_single_class_rejected():
    with pytest.raises(ValueError, match="both classes required"):
        train_svm(np.zeros((3, 1)), np.ones(3))


def _random_problem(rng, n=60, d=3):
    X = rng.standard_normal((n, d))
    y = np.where(X[:, 0] + 0.5 * rng.standard_normal(n) > 0, 1, -1)
    if len(set(y)) < 2:
        y[0] = -y[0]
    return X, y


@pytest.mark.parametrize("kind", ["linear", "rbf"])
def test_dual_feasibility_and_kkt(kind, rng):
    for _ in range(10):
        X, y = _random_problem(rng)
        C = float(rng.choice([0.1, 1, 10]))
        m = train_svm(X, y, C=C, kernel=KernelSpec(kind, 0.5))
        assert m.converged
        alpha = full_alpha(m, len(y))
        assert np.all(alpha >= 0) and np.all(alpha <= C + 1e-12)
        assert abs(np.sum(alpha * y)) <= 1e-6
        assert np.all(np.abs(m.dual_coefs) > 0) and np.all(np.abs(m.dual_coefs) <= C + 1e-12)
        assert np.max(kkt_violations(m, X, y)) <= 1e-3


def test_margin_support_vectors_on_margin(rng):
    X, y = _random_problem(rng)
    m = train_svm(X, y, C=1.0, kernel=KernelSpec("rbf", 0.5))
    alpha = np.abs(m.dual_coefs)
    free = (alpha > 1e-6) & (alpha < m.C - 1e-6)
    assert np.any(free)
    vals = decision_function(m, m.support_vectors[free])
    np.testing.assert_allclose(np.abs(vals), 1.0, atol=1e-2)


def test_separable_linear_full_accuracy(rng):
    X = np.concatenate([rng.standard_normal((30, 2)) + 4, rng.standard_normal((30, 2)) - 4])
    y = np.array([1] * 30 + [-1] * 30)
    m = train_svm(X, y, C=1000, kernel=KernelSpec("linear"))
    assert np.all(predict_label(m, X) == y)


def test_objective_non_decreasing(rng):
    X, y = _random_problem(rng)
    trace = []
    train_svm(X, y, C=1.0, kernel=KernelSpec("rbf", 1.0), objective_trace=trace)
    assert len(trace) > 1
    assert np.all(np.diff(trace) >= -1e-10)


def test_trace_matches_dual_objective(rng):
    X, y = _random_problem(rng, n=30)
    trace = []
    kern = KernelSpec("rbf", 1.0)
    m = train_svm(X, y, C=1.0, kernel=kern, objective_trace=trace)
    assert trace[-1] == pytest.approx(dual_objective(full_alpha(m, 30), X, y, kern), rel=1e-9)


def test_sign_matches_predict(rng):
    X, y = _random_problem(rng)
    m = train_svm(X, y, kernel=KernelSpec("rbf", 1.0))
    P = rng.standard_normal((100, 3))
    assert np.all(np.where(decision_function(m, P) > 0, 1, -1) == predict_label(m, P))


def test_decision_dimension_mismatch(rng):
    X, y = _random_problem(rng)
    m = train_svm(X, y)
    with pytest.raises(ValueError):
        decision_function(m, np.zeros(2))


# --- grid search ------------------------------------------------------------

def test_stratified_folds_balanced(rng):
    y = np.array([1] * 23 + [-1] * 17)
    f = stratified_folds(y, 5, 0)
    for k in range(5):
        assert 4 <= np.sum((f == k) & (y == 1)) <= 5
        assert 3 <= np.sum((f == k) & (y == -1)) <= 4
    assert np.array_equal(f, stratified_folds(y, 5, 0))


def test_folds_impossible():
    with pytest.raises(ValueError, match="fold construction impossible"):
        stratified_folds(np.array([1, 1, 1, -1]), 3, 0)


def test_single_cell_grid(rng):
    X, y = _random_problem(rng)
    r = grid_search(X, y, GridSearchConfig((3.0,), (0.7,), folds=3))
    assert (r.best_C, r.best_gamma) == (3.0, 0.7)


def test_separable_blobs_tie_break(rng):
    X = np.concatenate([rng.standard_normal((20, 2)) + 6, rng.standard_normal((20, 2)) - 6])
    y = np.array([1] * 20 + [-1] * 20)
    r = grid_search(X, y, GridSearchConfig((0.1, 1, 10), ("scale",), folds=5, seed=3))
    assert all(v == 1.0 for v in r.scores.values())
    assert r.best_C == 0.1


def test_grid_search_deterministic(rng):
    X, y = _random_problem(rng)
    cfg = GridSearchConfig((0.1, 1, 10), ("scale", 0.1, 1), folds=4, seed=9)
    assert grid_search(X, y, cfg).scores == grid_search(X, y, cfg).scores


@pytest.mark.parametrize("kw", [dict(C_grid=()), dict(folds=1), dict(C_grid=(-1,)), dict(gamma_grid=(0,))])
def test_grid_config_validation(kw):
    with pytest.raises(ValueError):
        GridSearchConfig(**kw)
