"""Data containers, losses and the learner contract shared by the package."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Protocol, Sequence

import numpy as np

#: Probability clipping applied by every classifier at prediction time.
EPS_CLIP = 1e-6


class ArtError(Exception):
    """Base class for errors raised by artlearn."""

    exit_code = 4


class ConfigurationError(ArtError, ValueError):
    """Invalid configuration: bad hyperparameters, degenerate splits, ..."""

    exit_code = 2


class DataError(ArtError, ValueError):
    """Invalid input data: shape/task mismatch, non-finite values, parse errors."""

    exit_code = 3


class UnsupportedLearnerError(ConfigurationError):
    """The learner cannot provide what was asked of it."""


class NumericalError(ArtError, ArithmeticError):
    """A numerical routine failed to produce a finite result."""

    exit_code = 4


class Task(enum.Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


@dataclass(frozen=True, eq=False)
class Dataset:
    """A labeled sample: ``features`` is (n, p), ``response`` is (n,).

    Zero-row datasets are accepted so that an empty auxiliary sample can be
    stacked; every fitting routine rejects them.
    """

    features: np.ndarray
    response: np.ndarray
    task: Task = Task.REGRESSION

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        y = np.array(self.response, dtype=float).reshape(-1)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if X.size else X.reshape(0, 1)
        if X.ndim != 2 or X.shape[1] < 1:
            raise DataError(f"features must be an (n, p) matrix with p >= 1, got shape {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise DataError(f"features have {X.shape[0]} rows but response has {y.shape[0]}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("features and response must be finite")
        task = Task(self.task)
        if task is Task.CLASSIFICATION and not np.all((y == 0) | (y == 1)):
            raise DataError("classification responses must be 0 or 1")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "task", task)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def __len__(self):
        return self.n

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.features[idx], self.response[idx], self.task)


@dataclass(frozen=True)
class SplitIndices:
    train_idx: np.ndarray
    test_idx: np.ndarray


class LossKind(enum.Enum):
    SQUARED = "squared"
    ASYMMETRIC_SQUARED = "asymmetric_squared"
    CROSS_ENTROPY = "cross_entropy"


@dataclass(frozen=True)
class Loss:
    """Loss L(y, prediction), vectorised over numpy arrays.

    Use the constructors :meth:`squared`, :meth:`asymmetric_squared` and
    :meth:`cross_entropy` rather than building instances by hand.
    """

    kind: LossKind
    tau: float = 0.5
    eps_clip: float = EPS_CLIP

    def __post_init__(self):
        if self.kind is LossKind.ASYMMETRIC_SQUARED and not 0.0 < self.tau < 1.0:
            raise ConfigurationError(f"tau must lie in (0, 1), got {self.tau}")
        if self.kind is LossKind.CROSS_ENTROPY and not 0.0 < self.eps_clip < 0.5:
            raise ConfigurationError(f"eps_clip must lie in (0, 0.5), got {self.eps_clip}")

    @classmethod
    def squared(cls) -> "Loss":
        return cls(LossKind.SQUARED)

    @classmethod
    def asymmetric_squared(cls, tau: float) -> "Loss":
        return cls(LossKind.ASYMMETRIC_SQUARED, tau=tau)

    @classmethod
    def cross_entropy(cls, eps_clip: float = EPS_CLIP) -> "Loss":
        return cls(LossKind.CROSS_ENTROPY, eps_clip=eps_clip)

    def __call__(self, y, pred) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        pred = np.asarray(pred, dtype=float)
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(pred))):
            raise DataError("loss inputs must be finite")
        if self.kind is LossKind.SQUARED:
            return (y - pred) ** 2
        if self.kind is LossKind.ASYMMETRIC_SQUARED:
            d = y - pred
            return np.abs(self.tau - (d < 0)) * d**2
        if not np.all((y == 0) | (y == 1)):
            raise DataError("cross entropy needs 0/1 responses")
        g = np.clip(pred, self.eps_clip, 1.0 - self.eps_clip)
        return -y * np.log(g) - (1.0 - y) * np.log1p(-g)


def evaluate_loss(loss: Loss, y: float, pred: float) -> float:
    """Scalar convenience wrapper around ``loss(y, pred)``."""
    return float(loss(y, pred))


class FittedModel(Protocol):
    """What every fitted learner exposes.

    ``predict`` maps an (n, p) matrix to n predictions (probabilities of
    class 1 for classifiers). ``selected_vars`` is ``None`` for learners that
    do not select variables.
    """

    label: str
    selected_vars: Optional[frozenset]

    def predict(self, X: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class LearnerSpec:
    """A learning algorithm: ``fit(data, seed)`` returns a fitted model.

    ``params`` records the hyperparameters so a model file can describe the
    learner; ``seed`` is the default stream for learners with internal
    randomness and is overridden per candidate by the pipeline.
    """

    name: str
    fit_fn: Callable[[Dataset, int], Any]
    supports_selection: bool = False
    tasks: tuple = (Task.REGRESSION, Task.CLASSIFICATION)
    params: dict = field(default_factory=dict)
    seed: int = 0

    def fit(self, data: Dataset, seed: Optional[int] = None):
        if data.task not in self.tasks:
            raise ConfigurationError(f"learner {self.name!r} does not support {data.task.value} data")
        return self.fit_fn(data, self.seed if seed is None else seed)


def split_primary(data: Dataset, ratio: float = 0.5, seed: int = 0) -> SplitIndices:
    """Random split of the primary sample into a training and a test part.

    The first ``floor(ratio * n)`` positions of a seeded permutation form
    the training part. Classification data are stratified by class so that
    both classes reach the training part whenever each class has at least
    two rows.
    """
    if not 0.0 < ratio < 1.0:
        raise ConfigurationError(f"split ratio must lie in (0, 1), got {ratio}")
    n = data.n
    n_train = math.floor(ratio * n)
    if n_train < 1 or n_train >= n:
        raise ConfigurationError(f"split ratio {ratio} leaves an empty part for n={n}")
    rng = np.random.default_rng(seed)
    if data.task is Task.REGRESSION:
        perm = rng.permutation(n)
        return SplitIndices(perm[:n_train], perm[n_train:])

    groups = [np.flatnonzero(data.response == c) for c in (0.0, 1.0)]
    groups = [g[rng.permutation(len(g))] for g in groups if len(g)]
    sizes = np.array([len(g) for g in groups])
    quota = np.floor(ratio * sizes).astype(int)
    # hand out the rounding remainder by largest fractional part
    remainder = n_train - quota.sum()
    order = np.argsort(-(ratio * sizes - quota), kind="stable")
    for j in order[:remainder]:
        quota[j] += 1
    for j in range(len(sizes)):
        if quota[j] == 0 and sizes[j] >= 2:
            donor = int(np.argmax(quota))
            quota[donor] -= 1
            quota[j] += 1
    train = np.concatenate([g[:q] for g, q in zip(groups, quota)])
    test = np.concatenate([g[q:] for g, q in zip(groups, quota)])
    return SplitIndices(train[rng.permutation(len(train))], test[rng.permutation(len(test))])


def stack(train_part: Dataset, aux: Dataset) -> Dataset:
    """Row-concatenate ``train_part`` (first) and ``aux``."""
    if train_part.p != aux.p:
        raise DataError(f"cannot stack p={train_part.p} with p={aux.p}")
    if train_part.task is not aux.task:
        raise DataError(f"cannot stack {train_part.task.value} data with {aux.task.value} data")
    if aux.n == 0:
        return train_part
    return Dataset(
        np.vstack([train_part.features, aux.features]),
        np.concatenate([train_part.response, aux.response]),
        train_part.task,
    )


def read_csv(
    path,
    response: Optional[str],
    task: Task = Task.REGRESSION,
    columns: Optional[Sequence[str]] = None,
):
    """Read a header-first numeric CSV.

    Returns ``(dataset, feature_names)``. When ``columns`` is given the
    features are reordered to that order by name; a missing response column
    is allowed only if ``response`` is ``None``, in which case the response
    is returned as zeros and ``dataset`` should be used for features only.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{path}: no data rows")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names")
    body = rows[1:]
    if response is not None and response not in header:
        raise DataError(f"{path}: response column {response!r} not found")
    feature_names = [h for h in header if h != response]
    if columns is not None:
        missing = [c for c in columns if c not in header]
        extra = [c for c in feature_names if c not in columns]
        if missing or extra:
            raise DataError(f"{path}: columns do not match the primary schema (missing {missing}, unexpected {extra})")
        feature_names = list(columns)
    values = np.empty((len(body), len(header)))
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(row)} fields, expected {len(header)}")
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise DataError(f"{path}: non-numeric value {cell!r} in row {i + 2}, column {header[j]!r}") from None
    col = {h: j for j, h in enumerate(header)}
    X = values[:, [col[c] for c in feature_names]] if feature_names else np.empty((len(body), 0))
    y = values[:, col[response]] if response is not None else np.zeros(len(body))
    if response is None and task is Task.CLASSIFICATION:
        task = Task.REGRESSION
    return Dataset(X, y, task), feature_names
