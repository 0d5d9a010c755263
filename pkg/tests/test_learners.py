import math

import numpy as np
import pytest
from scipy.special import expit

from artlearn.core import EPS_CLIP, ConfigurationError, DataError, Dataset, Task
from artlearn.learners import (
    KNNModel,
    LassoModel,
    LinearModel,
    StumpEnsemble,
    cv_lasso,
    fit_adaboost_stumps,
    fit_knn,
    fit_lasso,
    fit_logistic,
    fit_ols,
    fit_ridge,
    knn,
    lasso_cv,
    make_learner,
    model_from_dict,
)


def _reg(n, p, seed=0, noise=1.0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    beta = rng.normal(size=p)
    return Dataset(X, X @ beta + 0.5 + noise * rng.normal(size=n), Task.REGRESSION), beta


def _clf(n, p, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = (rng.uniform(size=n) < expit(X @ np.ones(p))).astype(float)
    return Dataset(X, y, Task.CLASSIFICATION)


def gradient_descent_ls(X, y, iters=20000):
    """Least squares with intercept by plain gradient descent on the centred problem."""
    xm, ym = X.mean(axis=0), y.mean()
    Xc, yc = X - xm, y - ym
    step = 1.0 / np.linalg.norm(Xc, 2) ** 2
    beta = np.zeros(X.shape[1])
    for _ in range(iters):
        beta -= step * Xc.T @ (Xc @ beta - yc)
    return ym - xm @ beta, beta


def standardise(X):
    return (X - X.mean(axis=0)) / X.std(axis=0)


class TestOLS:
    def test_exact_line(self):
        m = fit_ols(Dataset(np.array([[1.0], [2.0]]), np.array([2.0, 4.0]), Task.REGRESSION))
        assert m.intercept == pytest.approx(0.0, abs=1e-10)
        np.testing.assert_allclose(m.coefficients, [2.0], atol=1e-10)

    def test_constant_response(self):
        rng = np.random.default_rng(0)
        m = fit_ols(Dataset(rng.normal(size=(20, 3)), np.full(20, 4.2), Task.REGRESSION))
        assert m.intercept == pytest.approx(4.2)
        np.testing.assert_allclose(m.coefficients, 0.0, atol=1e-12)

    def test_matches_gradient_descent(self):
        data, _ = _reg(50, 10, seed=1)
        b0, b = gradient_descent_ls(data.features, data.response)
        m = fit_ols(data)
        np.testing.assert_allclose(m.predict(data.features), b0 + data.features @ b, atol=1e-6)

    def test_rank_deficient_falls_back(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(30, 1))
        X = np.hstack([x, x, rng.normal(size=(30, 1))])
        y = X[:, 0] + X[:, 2]
        m = fit_ols(Dataset(X, y, Task.REGRESSION))
        assert np.all(np.isfinite(m.coefficients))
        np.testing.assert_allclose(m.predict(X), y, atol=1e-5)

    def test_more_columns_than_rows(self):
        data, _ = _reg(5, 12, seed=3)
        m = fit_ols(data)
        assert np.all(np.isfinite(m.predict(data.features)))

    def test_needs_two_rows(self):
        with pytest.raises(DataError, match="insufficient"):
            fit_ols(Dataset(np.ones((1, 2)), np.ones(1), Task.REGRESSION))

    def test_rejects_classification(self):
        with pytest.raises(DataError):
            fit_ols(_clf(10, 2))


class TestRidge:
    def test_zero_penalty_is_ols(self):
        data, _ = _reg(30, 4, seed=4)
        np.testing.assert_allclose(fit_ridge(data, 0.0).coefficients, fit_ols(data).coefficients)

    def test_huge_penalty_shrinks_to_mean(self):
        data, _ = _reg(30, 4, seed=5)
        m = fit_ridge(data, 1e12)
        np.testing.assert_allclose(m.coefficients, 0.0, atol=1e-9)
        assert m.intercept == pytest.approx(data.response.mean(), abs=1e-8)

    def test_closed_form(self):
        data, _ = _reg(20, 5, seed=6)
        X, y = data.features, data.response
        Xc, yc = X - X.mean(axis=0), y - y.mean()
        beta = np.linalg.inv(Xc.T @ Xc + np.eye(5)) @ Xc.T @ yc
        np.testing.assert_allclose(fit_ridge(data, 1.0).coefficients, beta, atol=1e-8)

    def test_negative_penalty(self):
        data, _ = _reg(10, 2)
        with pytest.raises(ConfigurationError):
            fit_ridge(data, -1.0)


class TestLogistic:
    def test_balanced_zero_features(self):
        y = np.array([0.0, 1.0] * 10)
        m = fit_logistic(Dataset(np.zeros((20, 1)), y, Task.CLASSIFICATION))
        assert m.intercept == pytest.approx(0.0, abs=1e-8)
        np.testing.assert_allclose(m.predict(np.zeros((1, 1))), 0.5)

    def test_intercept_is_logit_of_rate(self):
        y = np.array([0.0] + [1.0] * 3)
        y = np.tile(y, 10)
        m = fit_logistic(Dataset(np.zeros((40, 1)), y, Task.CLASSIFICATION))
        assert m.intercept == pytest.approx(math.log(0.75 / 0.25), abs=1e-8)
        assert m.intercept == pytest.approx(math.log(3), abs=1e-8)

    def test_first_order_condition(self):
        data = _clf(100, 5, seed=7)
        l2 = 1e-8
        m = fit_logistic(data, l2=l2)
        A = np.hstack([np.ones((100, 1)), data.features])
        theta = np.concatenate([[m.intercept], m.coefficients])
        grad = A.T @ (data.response - expit(A @ theta))
        grad[1:] -= l2 * theta[1:]
        assert np.max(np.abs(grad)) < 1e-6

    def test_separable_stays_finite_and_clipped(self):
        X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
        m = fit_logistic(Dataset(X, np.array([0.0, 0.0, 1.0, 1.0]), Task.CLASSIFICATION))
        p = m.predict(np.array([[-100.0], [100.0]]))
        assert np.all(np.isfinite(m.coefficients))
        np.testing.assert_allclose(p, [EPS_CLIP, 1 - EPS_CLIP])

    def test_single_class(self):
        with pytest.raises(DataError, match="both classes"):
            fit_logistic(Dataset(np.zeros((4, 1)), np.ones(4), Task.CLASSIFICATION))


class TestLasso:
    def test_zero_penalty_is_ols(self):
        data, _ = _reg(60, 6, seed=8)
        np.testing.assert_allclose(fit_lasso(data, 0.0).coefficients, fit_ols(data).coefficients, atol=1e-6)

    def test_soft_threshold_single_predictor(self):
        x = np.array([[-1.0], [1.0], [-1.0], [1.0]])  # mean 0, unit population variance
        m = fit_lasso(Dataset(x, x[:, 0].copy(), Task.REGRESSION), 0.3)
        np.testing.assert_allclose(m.coefficients, [max(1.0 - 0.3, 0.0)], atol=1e-9)

    def test_lambda_max_gives_zero(self):
        data, _ = _reg(40, 8, seed=9)
        Z = standardise(data.features)
        lam_max = np.max(np.abs(Z.T @ (data.response - data.response.mean()))) / data.n
        m = fit_lasso(data, lam_max)
        np.testing.assert_array_equal(m.coefficients, 0.0)
        assert m.active_set == frozenset()
        # zero vector is optimal: every subgradient condition holds
        assert np.all(np.abs(Z.T @ (data.response - data.response.mean())) / data.n <= lam_max + 1e-12)

    @pytest.mark.parametrize("n,p,lam", [(60, 8, 0.05), (40, 100, 0.1), (150, 200, 0.08)])
    def test_subgradient_optimality(self, n, p, lam):
        data, _ = _reg(n, p, seed=n + p)
        m = fit_lasso(data, lam)
        X, y = data.features, data.response
        sd = X.std(axis=0)
        Z = standardise(X)
        b_std = m.coefficients * sd
        r = (y - y.mean()) - Z @ b_std
        g = Z.T @ r / n
        active = b_std != 0
        np.testing.assert_allclose(g[active], lam * np.sign(b_std[active]), atol=1e-5)
        assert np.all(np.abs(g[~active]) <= lam + 1e-5)
        assert m.active_set == frozenset(np.flatnonzero(m.coefficients).tolist())

    def test_selected_vars_equal_active_set(self):
        data, _ = _reg(50, 10, seed=10)
        m = fit_lasso(data, 0.2)
        assert m.selected_vars == m.active_set

    def test_negative_penalty(self):
        data, _ = _reg(10, 2)
        with pytest.raises(ConfigurationError):
            fit_lasso(data, -0.1)


class TestCvLasso:
    def test_noiseless_signal_picks_small_penalty(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(100, 20))
        beta = np.zeros(20)
        beta[:5] = [3, -2, 2, 1.5, -1]
        data = Dataset(X, X @ beta, Task.REGRESSION)
        m = cv_lasso(data, seed=0)
        assert m.lambda_reg < 0.05 * np.max(np.abs(standardise(X).T @ (data.response - data.response.mean()))) / 100
        assert np.mean((m.predict(X) - data.response) ** 2) < 1e-2

    def test_pure_noise_selects_little(self):
        rng = np.random.default_rng(12)
        data = Dataset(rng.normal(size=(100, 20)), rng.normal(size=100), Task.REGRESSION)
        m = cv_lasso(data, seed=3)
        assert len(m.active_set) <= 2

    def test_deterministic(self):
        data, _ = _reg(80, 30, seed=13)
        a, b = cv_lasso(data, seed=5), cv_lasso(data, seed=5)
        assert a.lambda_reg == b.lambda_reg
        np.testing.assert_array_equal(a.coefficients, b.coefficients)

    def test_early_stop_agrees_with_full_grid_on_sparse_signal(self):
        rng = np.random.default_rng(20)
        for seed in range(3):
            X = rng.normal(size=(75, 200))
            beta = np.zeros(200)
            beta[:16] = 0.3
            data = Dataset(X, X @ beta + rng.normal(size=75), Task.REGRESSION)
            assert cv_lasso(data, seed=seed).lambda_reg == cv_lasso(data, seed=seed, patience=None).lambda_reg

    def test_full_grid_returns_global_minimum(self):
        data, _ = _reg(60, 10, seed=24)
        m = cv_lasso(data, grid_size=30, seed=1, patience=None)
        assert len(m.cv_errors) == 30
        Z = standardise(data.features)
        lam_max = np.max(np.abs(Z.T @ (data.response - data.response.mean()))) / data.n
        grid = np.geomspace(lam_max, 1e-3 * lam_max, 30)
        assert m.lambda_reg == pytest.approx(grid[int(np.argmin(m.cv_errors))], rel=1e-12)
        early = cv_lasso(data, grid_size=30, seed=1)
        assert early.cv_errors == m.cv_errors[: len(early.cv_errors)]
        assert min(m.cv_errors) <= min(early.cv_errors)

    def test_one_standard_error_rule_matches_refit_oracle(self):
        data, _ = _reg(60, 10, seed=25, noise=3.0)
        grid_size, K = 20, 5
        m = cv_lasso(data, n_folds=K, grid_size=grid_size, seed=2, patience=None, rule="1se")
        # oracle: refit every fold at every penalty from scratch
        Z = standardise(data.features)
        lam_max = np.max(np.abs(Z.T @ (data.response - data.response.mean()))) / data.n
        grid = np.geomspace(lam_max, 1e-3 * lam_max, grid_size)
        folds = np.array_split(np.random.default_rng(2).permutation(data.n), K)
        mse = np.empty((grid_size, K))
        for f, hold in enumerate(folds):
            train = data.subset(np.setdiff1d(np.arange(data.n), hold))
            for i, lam in enumerate(grid):
                fit = fit_lasso(train, lam)
                mse[i, f] = np.mean((fit.predict(data.features[hold]) - data.response[hold]) ** 2)
        sizes = np.array([len(h) for h in folds])
        mean = mse @ sizes / data.n
        se = np.sqrt(((mse - mean[:, None]) ** 2) @ sizes / data.n / (K - 1))
        best = int(np.argmin(mean))
        expected = grid[np.flatnonzero(mean <= mean[best] + se[best])[0]]
        np.testing.assert_allclose(m.cv_errors, mean, rtol=1e-6)
        assert m.lambda_reg == pytest.approx(expected, rel=1e-12)
        assert m.lambda_reg >= cv_lasso(data, n_folds=K, grid_size=grid_size, seed=2, patience=None).lambda_reg

    def test_unknown_rule(self):
        data, _ = _reg(30, 3)
        with pytest.raises(ConfigurationError):
            cv_lasso(data, rule="2se")
        with pytest.raises(ConfigurationError):
            lasso_cv(rule="2se")

    def test_too_few_rows(self):
        data, _ = _reg(4, 2)
        with pytest.raises(ConfigurationError):
            cv_lasso(data, n_folds=5)


class TestKNN:
    def test_k_equals_n_is_class_rate(self):
        data = _clf(30, 2, seed=14)
        m = fit_knn(data, 30)
        rng = np.random.default_rng(0)
        np.testing.assert_allclose(m.predict(rng.normal(size=(5, 2))), data.response.mean())

    def test_one_neighbour_reproduces_label(self):
        data = _clf(30, 2, seed=15)
        m = fit_knn(data, 1)
        np.testing.assert_allclose(m.predict(data.features), np.clip(data.response, EPS_CLIP, 1 - EPS_CLIP))

    def test_xor(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = np.array([0.0, 1.0, 1.0, 0.0])
        m = fit_knn(Dataset(X, y, Task.CLASSIFICATION), 1)
        assert np.array_equal(m.predict(X) > 0.5, y == 1)

    def test_ties_go_to_lower_index(self):
        X = np.array([[-1.0], [1.0]])
        m = fit_knn(Dataset(X, np.array([1.0, 0.0]), Task.CLASSIFICATION), 1)
        np.testing.assert_allclose(m.predict(np.array([[0.0]])), 1 - EPS_CLIP)

    @pytest.mark.parametrize("k", [0, 11])
    def test_k_range(self, k):
        with pytest.raises(ConfigurationError):
            fit_knn(_clf(10, 2), k)

    def test_factory_caps_k(self):
        data = _clf(3, 2, seed=16)
        assert knn(k=5).fit(data).k == 3


class TestStumps:
    def test_zero_rounds_is_class_rate(self):
        data = _clf(40, 3, seed=17)
        m = fit_adaboost_stumps(data, n_rounds=0)
        np.testing.assert_allclose(m.predict(data.features), data.response.mean())

    def test_deviance_decreases(self):
        data = _clf(120, 4, seed=18)
        m = fit_adaboost_stumps(data)
        dev = np.array(m.deviance_path)
        assert np.all(np.diff(dev) <= 1e-9)
        assert dev[-1] < dev[0]

    def test_learns_threshold(self):
        rng = np.random.default_rng(19)
        X = rng.uniform(-1, 1, size=(200, 3))
        y = (X[:, 1] > 0.2).astype(float)
        m = fit_adaboost_stumps(Dataset(X, y, Task.CLASSIFICATION), n_rounds=200, learning_rate=0.5)
        assert np.mean((m.predict(X) > 0.5) == (y == 1)) > 0.98
        assert set(m.features.tolist()) == {1}

    def test_outputs_clipped(self):
        data = _clf(60, 2, seed=20)
        m = fit_adaboost_stumps(data, n_rounds=300, learning_rate=1.0)
        p = m.predict(np.random.default_rng(0).normal(scale=100, size=(200, 2)))
        assert np.all((p >= EPS_CLIP) & (p <= 1 - EPS_CLIP))


class TestSerialisation:
    def test_round_trip(self):
        reg, _ = _reg(40, 5, seed=21)
        clf = _clf(40, 3, seed=22)
        X_reg, X_clf = reg.features, clf.features
        for model, X in [
            (fit_ols(reg), X_reg),
            (fit_lasso(reg, 0.1), X_reg),
            (fit_logistic(clf), X_clf),
            (fit_knn(clf, 3), X_clf),
            (fit_adaboost_stumps(clf, n_rounds=20), X_clf),
        ]:
            back = model_from_dict(model.to_dict())
            assert type(back) is type(model)
            np.testing.assert_array_equal(back.predict(X), model.predict(X))

    def test_lasso_keeps_selection(self):
        reg, _ = _reg(40, 5, seed=23)
        m = fit_lasso(reg, 0.3)
        assert model_from_dict(m.to_dict()).selected_vars == m.selected_vars

    def test_unknown_kind(self):
        with pytest.raises(DataError):
            model_from_dict({"kind": "forest"})


class TestRegistry:
    def test_lookup(self):
        assert make_learner("knn", k=3).params["k"] == 3
        assert make_learner("lasso-cv").supports_selection

    def test_unknown(self):
        with pytest.raises(ConfigurationError, match="unknown learner"):
            make_learner("svm")

    def test_bad_params(self):
        with pytest.raises(ConfigurationError):
            make_learner("knn", depth=3)

    def test_model_types(self):
        reg, _ = _reg(30, 3)
        assert isinstance(lasso_cv().fit(reg), LassoModel)
        assert isinstance(make_learner("ols").fit(reg), LinearModel)
        assert isinstance(make_learner("adaboost").fit(_clf(30, 2)), StumpEnsemble)
        assert isinstance(make_learner("knn").fit(_clf(30, 2)), KNNModel)
