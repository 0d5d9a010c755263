"""Built-in learners: least squares, ridge, logistic, lasso, k-NN, boosted stumps.

Every ``fit_*`` function takes a :class:`~artlearn.core.Dataset` and returns
an immutable fitted model with a vectorised ``predict``. The lower-case
factories at the bottom (``ols()``, ``lasso_cv()``, ...) wrap them as
:class:`~artlearn.core.LearnerSpec` objects for the pipeline.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional

import numba
import numpy as np
import scipy.linalg
from scipy.special import expit

from .core import (
    EPS_CLIP,
    ConfigurationError,
    DataError,
    Dataset,
    LearnerSpec,
    NumericalError,
    Task,
)

#: Ridge penalty used when the least-squares Gram matrix is singular.
OLS_FALLBACK_PENALTY = 1e-8
LASSO_TOL = 1e-7
LASSO_ZERO = 1e-12


class Link(enum.Enum):
    IDENTITY = "identity"
    LOGIT = "logit"


@dataclass(frozen=True, eq=False)
class LinearModel:
    intercept: float
    coefficients: np.ndarray
    link: Link = Link.IDENTITY
    label: str = "linear"
    eps_clip: float = EPS_CLIP

    selected_vars = None

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.intercept + X @ self.coefficients

    def predict(self, X) -> np.ndarray:
        eta = self.decision_function(X)
        if self.link is Link.LOGIT:
            return np.clip(expit(eta), self.eps_clip, 1.0 - self.eps_clip)
        return eta

    def to_dict(self) -> dict:
        return {
            "kind": "linear",
            "label": self.label,
            "link": self.link.value,
            "intercept": float(self.intercept),
            "coefficients": [float(c) for c in self.coefficients],
        }


@dataclass(frozen=True, eq=False)
class LassoModel(LinearModel):
    lambda_reg: float = 0.0
    cv_errors: Optional[tuple] = None

    @property
    def active_set(self) -> frozenset:
        return frozenset(int(j) for j in np.flatnonzero(self.coefficients != 0.0))

    @property
    def selected_vars(self) -> frozenset:
        return self.active_set

    def to_dict(self) -> dict:
        d = super().to_dict()
        d.update(kind="lasso", lambda_reg=float(self.lambda_reg))
        return d


@dataclass(frozen=True, eq=False)
class KNNModel:
    features: np.ndarray
    response: np.ndarray
    k: int
    label: str = "knn"
    eps_clip: float = EPS_CLIP

    selected_vars = None

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty(X.shape[0])
        chunk = max(1, 2_000_000 // max(1, self.features.size))
        for start in range(0, X.shape[0], chunk):
            q = X[start : start + chunk]
            d2 = ((q[:, None, :] - self.features[None, :, :]) ** 2).sum(axis=2)
            # stable sort: equal distances keep training-row order
            nearest = np.argsort(d2, axis=1, kind="stable")[:, : self.k]
            out[start : start + chunk] = self.response[nearest].mean(axis=1)
        return np.clip(out, self.eps_clip, 1.0 - self.eps_clip)

    def to_dict(self) -> dict:
        return {
            "kind": "knn",
            "label": self.label,
            "k": int(self.k),
            "features": self.features.tolist(),
            "response": self.response.tolist(),
        }


@dataclass(frozen=True, eq=False)
class StumpEnsemble:
    """Additive logit model ``base + sum of stumps``.

    A stump sends ``x[feature] <= threshold`` to its left score and
    everything else to its right score; scores already include the
    learning rate.
    """

    base_score: float
    features: np.ndarray
    thresholds: np.ndarray
    left: np.ndarray
    right: np.ndarray
    learning_rate: float = 0.1
    label: str = "adaboost"
    eps_clip: float = EPS_CLIP
    deviance_path: tuple = field(default=(), repr=False)

    selected_vars = None

    @property
    def n_rounds(self) -> int:
        return len(self.features)

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        f = np.full(X.shape[0], self.base_score)
        for j, t, lo, hi in zip(self.features, self.thresholds, self.left, self.right):
            f += np.where(X[:, j] <= t, lo, hi)
        return f

    def predict(self, X) -> np.ndarray:
        return np.clip(expit(self.decision_function(X)), self.eps_clip, 1.0 - self.eps_clip)

    def to_dict(self) -> dict:
        return {
            "kind": "stumps",
            "label": self.label,
            "base_score": float(self.base_score),
            "learning_rate": float(self.learning_rate),
            "features": [int(j) for j in self.features],
            "thresholds": [float(t) for t in self.thresholds],
            "left": [float(v) for v in self.left],
            "right": [float(v) for v in self.right],
        }


def model_from_dict(d: dict):
    """Inverse of the models' ``to_dict``."""
    kind = d["kind"]
    if kind in ("linear", "lasso"):
        kw = dict(
            intercept=float(d["intercept"]),
            coefficients=np.array(d["coefficients"], dtype=float),
            link=Link(d["link"]),
            label=d["label"],
        )
        if kind == "lasso":
            return LassoModel(lambda_reg=float(d["lambda_reg"]), **kw)
        return LinearModel(**kw)
    if kind == "knn":
        return KNNModel(
            features=np.array(d["features"], dtype=float).reshape(len(d["response"]), -1),
            response=np.array(d["response"], dtype=float),
            k=int(d["k"]),
            label=d["label"],
        )
    if kind == "stumps":
        return StumpEnsemble(
            base_score=float(d["base_score"]),
            features=np.array(d["features"], dtype=int),
            thresholds=np.array(d["thresholds"], dtype=float),
            left=np.array(d["left"], dtype=float),
            right=np.array(d["right"], dtype=float),
            learning_rate=float(d["learning_rate"]),
            label=d["label"],
        )
    raise DataError(f"unknown model kind {kind!r}")


def _require(data: Dataset, task: Task, min_rows: int = 1):
    if data.task is not task:
        raise DataError(f"expected {task.value} data, got {data.task.value}")
    if data.n < min_rows:
        raise DataError(f"insufficient data: need at least {min_rows} rows, got {data.n}")


def _both_classes(data: Dataset):
    if data.response.min() == data.response.max():
        raise DataError("classification data must contain both classes")


# -- least squares and ridge ------------------------------------------------


def _ridge_centered(Xc, yc, penalty):
    G = Xc.T @ Xc
    G[np.diag_indices_from(G)] += penalty
    return scipy.linalg.solve(G, Xc.T @ yc, assume_a="pos")


def fit_ols(data: Dataset) -> LinearModel:
    """Least squares with an unpenalised intercept.

    Solved by a column-pivoted QR of the centred design. A rank-deficient
    design falls back to ridge with penalty ``OLS_FALLBACK_PENALTY``.
    """
    _require(data, Task.REGRESSION, min_rows=2)
    X, y = data.features, data.response
    x_mean, y_mean = X.mean(axis=0), y.mean()
    Xc, yc = X - x_mean, y - y_mean
    Q, R, piv = scipy.linalg.qr(Xc, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(Xc.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    if diag.size == data.p and diag.size and diag[-1] > tol:
        beta = np.empty(data.p)
        beta[piv] = scipy.linalg.solve_triangular(R, Q.T @ yc)
    else:
        beta = _ridge_centered(Xc, yc, OLS_FALLBACK_PENALTY)
    return LinearModel(float(y_mean - x_mean @ beta), beta, Link.IDENTITY, "ols")


def fit_ridge(data: Dataset, penalty: float) -> LinearModel:
    """Minimise ``RSS + penalty * |beta|^2``; the intercept is unpenalised."""
    if not (np.isfinite(penalty) and penalty >= 0):
        raise ConfigurationError(f"ridge penalty must be >= 0, got {penalty}")
    if penalty == 0:
        return replace(fit_ols(data), label="ridge")
    _require(data, Task.REGRESSION, min_rows=2)
    X, y = data.features, data.response
    x_mean, y_mean = X.mean(axis=0), y.mean()
    beta = _ridge_centered(X - x_mean, y - y_mean, penalty)
    return LinearModel(float(y_mean - x_mean @ beta), beta, Link.IDENTITY, "ridge")


# -- logistic regression ----------------------------------------------------


def fit_logistic(data: Dataset, max_iter: int = 100, tol: float = 1e-8, l2: float = 1e-8) -> LinearModel:
    """Logistic regression by iteratively reweighted least squares.

    Maximises ``loglik - l2/2 * |beta|^2`` (intercept unpenalised) and stops
    once the largest Newton step falls below ``tol``.
    """
    _require(data, Task.CLASSIFICATION)
    _both_classes(data)
    if l2 < 0:
        raise ConfigurationError(f"l2 must be >= 0, got {l2}")
    X, y = data.features, data.response
    A = np.hstack([np.ones((data.n, 1)), X])
    pen = np.full(A.shape[1], l2)
    pen[0] = 0.0
    theta = np.zeros(A.shape[1])
    for _ in range(max_iter):
        prob = expit(A @ theta)
        w = np.maximum(prob * (1.0 - prob), 1e-12)
        grad = A.T @ (y - prob) - pen * theta
        H = A.T @ (A * w[:, None])
        H[np.diag_indices_from(H)] += pen
        try:
            step = scipy.linalg.solve(H, grad, assume_a="pos")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        theta = theta + step
        if not np.all(np.isfinite(theta)):
            raise NumericalError("logistic regression diverged")
        if np.max(np.abs(step)) < tol:
            break
    return LinearModel(float(theta[0]), theta[1:].copy(), Link.LOGIT, "logistic")


# -- lasso ------------------------------------------------------------------


@numba.njit(cache=True)
def _cd_lasso(XT, colsq, grad, beta, G, have, lam, tol, max_sweeps):
    """Cyclic coordinate descent with covariance updates.

    ``grad`` holds ``X^T r / n`` for the current ``beta`` and is kept in
    sync; ``G[:, j]`` (column j of ``X^T X / n``) is filled lazily the first
    time coordinate j moves. Alternates a full sweep with sweeps over the
    nonzero coordinates until the largest coefficient change is below
    ``tol``. Updates ``grad``, ``beta``, ``G`` and ``have`` in place.
    """
    p, n = XT.shape
    sweeps = 0
    while sweeps < max_sweeps:
        dmax = 0.0
        for j in range(p):
            if colsq[j] == 0.0:
                continue
            z = colsq[j] * beta[j] + grad[j]
            new = max(z - lam, 0.0) - max(-z - lam, 0.0)
            new /= colsq[j]
            delta = new - beta[j]
            if delta != 0.0:
                if not have[j]:
                    G[:, j] = XT @ XT[j] / n
                    have[j] = True
                grad -= delta * G[:, j]
                beta[j] = new
                dmax = max(dmax, abs(delta))
        sweeps += 1
        if dmax < tol:
            break

        active = np.flatnonzero(beta)
        start = beta[active].copy()
        while sweeps < max_sweeps:
            dmax = 0.0
            for j in active:
                z = colsq[j] * beta[j] + grad[j]
                new = max(z - lam, 0.0) - max(-z - lam, 0.0)
                new /= colsq[j]
                delta = new - beta[j]
                if delta != 0.0:
                    for k in active:
                        grad[k] -= delta * G[k, j]
                    beta[j] = new
                    dmax = max(dmax, abs(delta))
            sweeps += 1
            if dmax < tol:
                break
        # bring the gradient of the untouched coordinates up to date
        moved = beta[active] - start
        inactive = np.ones(p, dtype=np.bool_)
        inactive[active] = False
        for k in np.flatnonzero(inactive):
            acc = 0.0
            for i in range(active.size):
                acc += G[k, active[i]] * moved[i]
            grad[k] -= acc
    return sweeps


class _Standardized:
    """Centred, unit-variance copy of a design, kept transposed for the kernel."""

    def __init__(self, X, y):
        self.x_mean = X.mean(axis=0)
        sd = X.std(axis=0)
        self.keep = sd > 1e-12 * np.maximum(1.0, np.abs(self.x_mean))
        self.scale = np.where(self.keep, sd, 1.0)
        Z = (X - self.x_mean) / self.scale
        Z[:, ~self.keep] = 0.0
        self.XT = np.ascontiguousarray(Z.T)
        self.n = X.shape[0]
        self.colsq = (self.XT**2).sum(axis=1) / self.n
        self.y_mean = y.mean()
        self.yc = y - self.y_mean
        self.xty = self.XT @ self.yc / self.n

    def lambda_max(self) -> float:
        return float(np.max(np.abs(self.xty)))

    def path(self, lambdas, max_sweeps=100_000):
        """Warm-started solutions (standardised scale) along ``lambdas``."""
        p = self.XT.shape[0]
        beta = np.zeros(p)
        grad = self.xty.copy()
        G = np.zeros((p, p))
        have = np.zeros(p, dtype=bool)
        for lam in lambdas:
            _cd_lasso(self.XT, self.colsq, grad, beta, G, have, float(lam), LASSO_TOL, max_sweeps)
            yield lam, beta.copy()

    def back_transform(self, beta_std):
        beta = np.where(self.keep, beta_std / self.scale, 0.0)
        beta[np.abs(beta) <= LASSO_ZERO] = 0.0
        return float(self.y_mean - self.x_mean @ beta), beta


def fit_lasso(data: Dataset, lambda_reg: float) -> LassoModel:
    """Lasso on internally standardised features.

    Minimises ``(1/2n) RSS + lambda_reg * sum |b_j|`` on the centred,
    unit-variance design by cyclic coordinate descent, then maps the
    coefficients back to the original scale.
    """
    if not (np.isfinite(lambda_reg) and lambda_reg >= 0):
        raise ConfigurationError(f"lambda_reg must be >= 0, got {lambda_reg}")
    _require(data, Task.REGRESSION)
    std = _Standardized(data.features, data.response)
    lam_max = std.lambda_max()
    # warm start from lambda_max keeps the path short when lambda_reg is small
    grid = [lambda_reg]
    if lambda_reg < lam_max:
        grid = list(np.geomspace(lam_max, max(lambda_reg, 1e-3 * lam_max), 20)) + [lambda_reg]
    *_, (_, beta_std) = std.path(grid)
    intercept, beta = std.back_transform(beta_std)
    return LassoModel(intercept, beta, Link.IDENTITY, "lasso", lambda_reg=float(lambda_reg))


def lasso_grid(lam_max: float, grid_size: int) -> np.ndarray:
    if lam_max <= 0:
        return np.zeros(1)
    return np.geomspace(lam_max, 1e-3 * lam_max, grid_size)


def cv_lasso(
    data: Dataset,
    n_folds: int = 5,
    grid_size: int = 50,
    seed: int = 0,
    patience: Optional[int] = 5,
    rule: str = "min",
) -> LassoModel:
    """Lasso with the penalty chosen by K-fold cross-validated MSE.

    The grid runs log-uniformly from the full-data ``lambda_max`` down to
    ``1e-3 * lambda_max``; folds come from a seeded permutation. All folds
    walk the grid together, and the walk stops once the CV error has not
    improved for ``patience`` consecutive grid points (``None`` walks the
    whole grid). ``rule="min"`` keeps the penalty with the smallest CV
    error; ``rule="1se"`` keeps the largest penalty whose CV error is within
    one standard error (across folds) of that minimum. The chosen penalty is
    refit on all rows.
    """
    _require(data, Task.REGRESSION)
    if n_folds < 2 or data.n < n_folds:
        raise ConfigurationError(f"need n >= n_folds >= 2, got n={data.n}, n_folds={n_folds}")
    if grid_size < 1:
        raise ConfigurationError("grid_size must be >= 1")
    if rule not in ("min", "1se"):
        raise ConfigurationError(f"rule must be 'min' or '1se', got {rule!r}")
    full = _Standardized(data.features, data.response)
    grid = lasso_grid(full.lambda_max(), grid_size)
    folds = np.array_split(np.random.default_rng(seed).permutation(data.n), n_folds)
    paths = []
    for hold in folds:
        train = np.ones(data.n, dtype=bool)
        train[hold] = False
        std = _Standardized(data.features[train], data.response[train])
        paths.append((std, std.path(grid), data.features[hold], data.response[hold]))
    cv_mse, cv_se = [], []
    sizes = np.array([len(h) for h in folds], dtype=float)
    for i in range(len(grid)):
        fold_mse = np.empty(n_folds)
        for f, (std, path, Xh, yh) in enumerate(paths):
            _, b = next(path)
            b0, b1 = std.back_transform(b)
            fold_mse[f] = np.mean((yh - b0 - Xh @ b1) ** 2)
        mean = float(np.sum(sizes * fold_mse) / data.n)
        cv_mse.append(mean)
        cv_se.append(float(np.sqrt(np.sum(sizes * (fold_mse - mean) ** 2) / data.n / (n_folds - 1))))
        best = int(np.argmin(cv_mse))
        if patience is not None and i - best >= patience:
            break
    best = int(np.argmin(cv_mse))
    if rule == "1se":
        # grid is decreasing, so the first qualifying index is the largest penalty
        best = int(np.flatnonzero(np.array(cv_mse) <= cv_mse[best] + cv_se[best])[0])
    *_, (_, beta_std) = full.path(grid[: best + 1])
    intercept, beta = full.back_transform(beta_std)
    return LassoModel(
        intercept, beta, Link.IDENTITY, "lasso", lambda_reg=float(grid[best]), cv_errors=tuple(cv_mse)
    )


# -- nonlinear classifiers --------------------------------------------------


def fit_knn(data: Dataset, k: int) -> KNNModel:
    """k-nearest-neighbour class-1 frequency (Euclidean distance)."""
    _require(data, Task.CLASSIFICATION)
    if not 1 <= k <= data.n:
        raise ConfigurationError(f"k must lie in [1, {data.n}], got {k}")
    return KNNModel(data.features, data.response, int(k))


def _logistic_deviance(y, f):
    # -2 * loglik, written with logaddexp for stability
    return 2.0 * float(np.sum(np.logaddexp(0.0, f) - y * f))


def fit_adaboost_stumps(data: Dataset, n_rounds: int = 100, learning_rate: float = 0.1) -> StumpEnsemble:
    """Gradient boosting of depth-1 trees on the logistic deviance.

    Each round fits the stump with the smallest squared error to the
    residuals ``y - p`` over midpoints between consecutive distinct feature
    values; leaves predict the mean residual scaled by ``learning_rate``.
    """
    _require(data, Task.CLASSIFICATION)
    _both_classes(data)
    if n_rounds < 0 or learning_rate <= 0:
        raise ConfigurationError("n_rounds must be >= 0 and learning_rate > 0")
    X, y = data.features, data.response
    n = data.n
    rate = np.clip(y.mean(), EPS_CLIP, 1.0 - EPS_CLIP)
    base = float(np.log(rate / (1.0 - rate)))
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    valid = xs[1:] > xs[:-1]
    thresholds = 0.5 * (xs[1:] + xs[:-1])
    n_left = np.arange(1, n)[:, None]

    f = np.full(n, base)
    feats, thr, left, right = [], [], [], []
    deviance = [_logistic_deviance(y, f)]
    for _ in range(n_rounds):
        g = y - expit(f)
        total = g.sum()
        if n > 1 and valid.any():
            cum = np.cumsum(g[order], axis=0)[:-1]
            gain = np.where(valid, cum**2 / n_left + (total - cum) ** 2 / (n - n_left), -np.inf)
            i, j = np.unravel_index(np.argmax(gain.T), gain.T.shape)[::-1]
            t = thresholds[i, j]
            go_left = X[:, j] <= t
            lo = learning_rate * g[go_left].mean()
            hi = learning_rate * g[~go_left].mean()
        else:
            j, t = 0, np.inf
            go_left = np.ones(n, dtype=bool)
            lo = hi = learning_rate * total / n
        f = f + np.where(go_left, lo, hi)
        feats.append(int(j))
        thr.append(float(t))
        left.append(float(lo))
        right.append(float(hi))
        deviance.append(_logistic_deviance(y, f))
    return StumpEnsemble(
        base_score=base,
        features=np.array(feats, dtype=int),
        thresholds=np.array(thr),
        left=np.array(left),
        right=np.array(right),
        learning_rate=float(learning_rate),
        deviance_path=tuple(deviance),
    )


# -- learner specs ----------------------------------------------------------


def ols() -> LearnerSpec:
    return LearnerSpec("LS", lambda d, s: fit_ols(d), tasks=(Task.REGRESSION,), params={"learner": "ols"})


def ridge(penalty: float = 1.0) -> LearnerSpec:
    if penalty < 0:
        raise ConfigurationError(f"ridge penalty must be >= 0, got {penalty}")
    return LearnerSpec(
        "ridge",
        lambda d, s: fit_ridge(d, penalty),
        tasks=(Task.REGRESSION,),
        params={"learner": "ridge", "penalty": penalty},
    )


def logistic(max_iter: int = 100, tol: float = 1e-8, l2: float = 1e-8) -> LearnerSpec:
    return LearnerSpec(
        "logit",
        lambda d, s: fit_logistic(d, max_iter=max_iter, tol=tol, l2=l2),
        tasks=(Task.CLASSIFICATION,),
        params={"learner": "logistic", "max_iter": max_iter, "tol": tol, "l2": l2},
    )


def lasso(lambda_reg: float) -> LearnerSpec:
    return LearnerSpec(
        "lasso",
        lambda d, s: fit_lasso(d, lambda_reg),
        supports_selection=True,
        tasks=(Task.REGRESSION,),
        params={"learner": "lasso", "lambda_reg": lambda_reg},
    )


def lasso_cv(n_folds: int = 5, grid_size: int = 50, seed: int = 0, rule: str = "min") -> LearnerSpec:
    if rule not in ("min", "1se"):
        raise ConfigurationError(f"rule must be 'min' or '1se', got {rule!r}")
    return LearnerSpec(
        "lasso",
        lambda d, s: cv_lasso(d, n_folds=n_folds, grid_size=grid_size, seed=s, rule=rule),
        supports_selection=True,
        tasks=(Task.REGRESSION,),
        params={"learner": "lasso-cv", "n_folds": n_folds, "grid_size": grid_size, "rule": rule},
        seed=seed,
    )


def knn(k: int = 5) -> LearnerSpec:
    return LearnerSpec(
        "knn",
        lambda d, s: fit_knn(d, min(k, d.n)),
        tasks=(Task.CLASSIFICATION,),
        params={"learner": "knn", "k": k},
    )


def adaboost(n_rounds: int = 100, learning_rate: float = 0.1) -> LearnerSpec:
    return LearnerSpec(
        "adaboost",
        lambda d, s: fit_adaboost_stumps(d, n_rounds=n_rounds, learning_rate=learning_rate),
        tasks=(Task.CLASSIFICATION,),
        params={"learner": "adaboost", "n_rounds": n_rounds, "learning_rate": learning_rate},
    )


LEARNERS = {
    "ols": ols,
    "ridge": ridge,
    "logistic": logistic,
    "lasso": lasso,
    "lasso-cv": lasso_cv,
    "knn": knn,
    "adaboost": adaboost,
}


def make_learner(name: str, **params) -> LearnerSpec:
    """Look up a learner factory by its registry name."""
    try:
        factory = LEARNERS[name]
    except KeyError:
        raise ConfigurationError(f"unknown learner {name!r}; choose from {sorted(LEARNERS)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigurationError(f"bad hyperparameters for {name!r}: {exc}") from None
