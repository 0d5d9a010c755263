"""Adaptive robust transfer: aggregate models fit on primary data stacked with
each auxiliary sample, weighted by their sequential loss on held-out primary
rows.
"""

from __future__ import annotations

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .core import (
    ConfigurationError,
    DataError,
    Dataset,
    LearnerSpec,
    Loss,
    Task,
    UnsupportedLearnerError,
    split_primary,
    stack,
)
from .weighting import (
    PriorWeights,
    WeightTrace,
    default_lambda,
    sequential_weights,
    simplified_weights,
)

logger = logging.getLogger(__name__)


class WeightMode(enum.Enum):
    SEQUENTIAL = "sequential"
    SIMPLIFIED = "simplified"


@dataclass(frozen=True)
class ArtConfig:
    """Settings for :func:`art_fit` / :func:`art_iam_fit`.

    ``lam=None`` applies :func:`~artlearn.weighting.default_lambda`;
    ``priors=None`` means uniform priors. Splitting repeats up to
    ``n_splits`` times and stops early once the running average of the
    per-split weights moves by less than ``converge_tol``. ``n_jobs > 1``
    fits the candidates of a split on a thread pool; results do not depend
    on it.
    """

    lam: Optional[float] = None
    priors: Optional[Sequence[float]] = None
    split_ratio: float = 0.5
    n_splits: int = 10
    weight_mode: WeightMode = WeightMode.SEQUENTIAL
    converge_tol: float = 1e-3
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "weight_mode", WeightMode(self.weight_mode))
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigurationError(f"split_ratio must lie in (0, 1), got {self.split_ratio}")
        if self.lam is not None and not (np.isfinite(self.lam) and self.lam > 0):
            raise ConfigurationError(f"lambda must be positive, got {self.lam}")
        if self.n_splits < 1:
            raise ConfigurationError("n_splits must be >= 1")
        if self.converge_tol < 0:
            raise ConfigurationError("converge_tol must be >= 0")


@dataclass(frozen=True, eq=False)
class ArtModel:
    """Convex combination of fitted candidates.

    ``candidates`` are ordered dataset-major: for ``R`` learners, index
    ``m * R + r`` holds learner ``r`` fit on dataset ``m`` (``m = 0`` is the
    primary training part alone).
    """

    candidates: tuple
    final_weights: np.ndarray
    task: Task
    learner_names: tuple
    config_used: ArtConfig
    p: int
    lam: float = 1.0
    traces: tuple = field(default=(), repr=False)

    @property
    def n_datasets(self) -> int:
        return len(self.candidates) // len(self.learner_names)

    def predict(self, X) -> np.ndarray:
        """Aggregated predictions for the rows of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.p:
            raise DataError(f"expected {self.p} features, got {X.shape[1]}")
        preds = np.array([c.predict(X) for c in self.candidates])
        return self.final_weights @ preds

    def classify(self, X) -> np.ndarray:
        if self.task is not Task.CLASSIFICATION:
            raise ConfigurationError("classify() needs a classification model")
        return (self.predict(X) > 0.5).astype(int)


@dataclass(frozen=True)
class VariableImportance:
    vi: np.ndarray


def _derive_seed(*keys) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def _split_seed(seed, s):
    return _derive_seed(seed, 0, s)


def _candidate_seed(seed, s, c):
    return _derive_seed(seed, 1, s, c)


def _check_pool(primary: Dataset, auxiliaries: Sequence[Dataset]):
    for i, aux in enumerate(auxiliaries):
        if aux.p != primary.p:
            raise DataError(f"auxiliary {i} has {aux.p} features, primary has {primary.p}")
        if aux.task is not primary.task:
            raise DataError(f"auxiliary {i} is {aux.task.value} data, primary is {primary.task.value}")


def art_iam_fit(
    primary: Dataset,
    auxiliaries: Sequence[Dataset],
    learners: Sequence[LearnerSpec],
    loss: Loss,
    config: ArtConfig = ArtConfig(),
    cache: Optional[dict] = None,
) -> ArtModel:
    """Aggregate every (dataset, learner) pair.

    Args:
        primary: the sample whose task matters.
        auxiliaries: extra samples with the same columns and task.
        learners: one or more learner specs.
        loss: used to score candidates on the held-out primary rows.
        config: split, weighting and temperature settings.
        cache: optional dict reused across calls that share ``primary``, the
            leading auxiliaries, ``learners`` and ``config.seed``; fitted
            candidates are keyed by (split, dataset, learner), so sweeps over
            a growing auxiliary list refit only the new candidates.

    Returns:
        An :class:`ArtModel` holding the candidates of the last split and the
        weights averaged over all executed splits.
    """
    learners = list(learners)
    auxiliaries = list(auxiliaries)
    if not learners:
        raise ConfigurationError("need at least one learner")
    _check_pool(primary, auxiliaries)
    R = len(learners)
    n_cand = (len(auxiliaries) + 1) * R
    if config.priors is None:
        priors = PriorWeights.uniform(n_cand)
    else:
        priors = PriorWeights(config.priors)
        if len(priors) != n_cand:
            raise ConfigurationError(f"{len(priors)} priors given for {n_cand} candidates")

    n_train = int(np.floor(config.split_ratio * primary.n))
    lam = config.lam
    if lam is None:
        lam = default_lambda(n_train, [a.n for a in auxiliaries], primary.n - n_train)

    cache = {} if cache is None else cache
    executor = ThreadPoolExecutor(config.n_jobs) if config.n_jobs > 1 else None
    running = np.zeros(n_cand)
    previous = None
    traces = []
    try:
        for s in range(config.n_splits):
            split = split_primary(primary, config.split_ratio, _split_seed(config.seed, s))
            train = primary.subset(split.train_idx)
            test = primary.subset(split.test_idx)
            datasets = [train] + [stack(train, a) for a in auxiliaries]

            def fit_one(c, s=s, datasets=datasets):
                m, r = divmod(c, R)
                key = (s, m, r)
                if key not in cache:
                    model = learners[r].fit(datasets[m], seed=_candidate_seed(config.seed, s, c))
                    cache[key] = replace(model, label=f"{learners[r].name}[{m}]")
                return cache[key]

            if executor is None:
                models = [fit_one(c) for c in range(n_cand)]
            else:
                models = list(executor.map(fit_one, range(n_cand)))

            losses = np.array([loss(test.response, g.predict(test.features)) for g in models])
            if config.weight_mode is WeightMode.SEQUENTIAL:
                trace = sequential_weights(priors, losses, lam)
            else:
                w = simplified_weights(priors, losses.sum(axis=1), lam)
                trace = WeightTrace(sequential=w[:, None], final=w, lam=lam, cumulative_losses=losses.sum(axis=1)[:, None])
            traces.append(trace)
            running = running + (trace.final - running) / (s + 1)
            if previous is not None and np.max(np.abs(running - previous)) < config.converge_tol:
                logger.debug("weights converged after %d splits", s + 1)
                break
            previous = running
    finally:
        if executor is not None:
            executor.shutdown()

    weights = running / running.sum()
    return ArtModel(
        candidates=tuple(models),
        final_weights=weights,
        task=primary.task,
        learner_names=tuple(l.name for l in learners),
        config_used=config,
        p=primary.p,
        lam=float(lam),
        traces=tuple(traces),
    )


def art_fit(
    primary: Dataset,
    auxiliaries: Sequence[Dataset],
    learner: LearnerSpec,
    loss: Loss,
    config: ArtConfig = ArtConfig(),
    cache: Optional[dict] = None,
) -> ArtModel:
    """Single-learner ART; candidate ``m`` is fit on the primary training
    part stacked with auxiliary sample ``m`` (candidate 0 on the training
    part alone)."""
    return art_iam_fit(primary, auxiliaries, [learner], loss, config, cache=cache)


def art_predict(model: ArtModel, x) -> float:
    """Aggregated prediction for one feature vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != model.p:
        raise DataError(f"expected a feature vector of length {model.p}, got shape {x.shape}")
    return float(model.predict(x[None, :])[0])


def classify(model: ArtModel, x) -> int:
    """1 if the aggregated probability is strictly above 0.5, else 0."""
    if model.task is not Task.CLASSIFICATION:
        raise ConfigurationError("classify() needs a classification model")
    return int(art_predict(model, x) > 0.5)


def variable_importance(model: ArtModel) -> VariableImportance:
    """Weighted share of candidates that select each feature."""
    vi = np.zeros(model.p)
    for w, g in zip(model.final_weights, model.candidates):
        selected = getattr(g, "selected_vars", None)
        if selected is None:
            raise UnsupportedLearnerError(
                f"candidate {g.label} does not select variables, so variable importance is not well-defined"
            )
        idx = np.fromiter(selected, dtype=int, count=len(selected))
        vi[idx] += w
    return VariableImportance(np.clip(vi, 0.0, 1.0))
