"""Synthetic transfer-learning benchmarks and their result tables.

Four generators cover linear regression with shifted coefficients, logistic
classification, a Gaussian-mixture classification problem and a sparse
high-dimensional regression. :func:`run_experiment` replicates a sweep over
the number of auxiliary samples and their shift, scoring primary-only,
pooled and ART fits on a fresh test sample.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import expit

from .core import ConfigurationError, Dataset, LearnerSpec, Loss, Task, stack
from .pipeline import ArtConfig, art_fit, art_iam_fit, variable_importance


class GeneratorKind(enum.Enum):
    LINEAR_REGRESSION = "linear_regression"
    LOGISTIC_CLASSIFICATION = "logistic_classification"
    GAUSSIAN_MIXTURE = "gaussian_mixture"
    SPARSE_LINEAR = "sparse_linear"


class Method(enum.Enum):
    PRIMARY_ONLY = "primary_only"
    POOLED = "pooled"
    ART = "art"
    ART_IAM = "art_iam"


SPARSE_ACTIVE = 16
SPARSE_VALUE = 0.3
SPARSE_EXTRA = 12
MIXTURE_COMPONENTS = 5
MIXTURE_ACTIVE = 5

_DEFAULTS = {
    GeneratorKind.LINEAR_REGRESSION: dict(p=10, n_primary=50, n_aux=50),
    GeneratorKind.LOGISTIC_CLASSIFICATION: dict(p=10, n_primary=50, n_aux=50),
    GeneratorKind.GAUSSIAN_MIXTURE: dict(p=10, n_primary=50, n_aux=50),
    GeneratorKind.SPARSE_LINEAR: dict(p=200, n_primary=150, n_aux=100),
}


@dataclass(frozen=True)
class GeneratorSpec:
    kind: GeneratorKind
    p: int
    n_primary: int
    n_aux: int
    M: int = 1
    n_adversarial: int = 0
    xi: float = 0.5
    n_test: int = 5000
    seed: int = 0

    @classmethod
    def defaults(cls, kind, **overrides) -> "GeneratorSpec":
        kind = GeneratorKind(kind)
        return cls(kind=kind, **{**_DEFAULTS[kind], **overrides})

    @property
    def task(self) -> Task:
        if self.kind in (GeneratorKind.LINEAR_REGRESSION, GeneratorKind.SPARSE_LINEAR):
            return Task.REGRESSION
        return Task.CLASSIFICATION

    def validate(self):
        if self.p < 1 or self.n_primary < 2 or self.n_aux < 1 or self.n_test < 1:
            raise ConfigurationError(f"invalid sizes in {self}")
        if self.M < 0 or self.n_adversarial < 0:
            raise ConfigurationError("M and n_adversarial must be >= 0")
        if self.kind is GeneratorKind.SPARSE_LINEAR and self.p < SPARSE_ACTIVE + SPARSE_EXTRA:
            raise ConfigurationError(f"sparse design needs p >= {SPARSE_ACTIVE + SPARSE_EXTRA}, got {self.p}")
        if self.kind is GeneratorKind.GAUSSIAN_MIXTURE and self.p < MIXTURE_ACTIVE:
            raise ConfigurationError(f"mixture design needs p >= {MIXTURE_ACTIVE}, got {self.p}")


class SimData(NamedTuple):
    """Generated samples; ``coefficients`` holds the true coefficient vectors
    (``primary``, ``auxiliary``, ``adversarial``) for the linear kinds."""

    primary: Dataset
    auxiliaries: list
    adversarials: list
    test: Dataset
    truth: Optional[frozenset]
    coefficients: Optional[dict] = None


def ar1_covariance(p: int, rho: float = 0.5) -> np.ndarray:
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def _rng(seed, *keys):
    return np.random.default_rng(np.random.SeedSequence([int(seed), *keys]))


def _gaussian(rng, n, chol):
    return rng.standard_normal((n, chol.shape[0])) @ chol.T


def generate(spec: GeneratorSpec) -> SimData:
    """Draw primary, auxiliary, adversarial and test samples.

    Each sample has its own random stream derived from ``spec.seed``, so
    auxiliary sample ``m`` is the same whatever ``spec.M`` is; sweeps over
    ``M`` therefore see nested pools.
    """
    spec.validate()
    kind = spec.kind
    if kind is GeneratorKind.SPARSE_LINEAR:
        return _generate_sparse(spec)
    chol = np.linalg.cholesky(ar1_covariance(spec.p))
    if kind is GeneratorKind.GAUSSIAN_MIXTURE:
        return _generate_mixture(spec, chol)

    beta = _rng(spec.seed, 0).normal(1.0, 1.0, spec.p)
    xi = spec.xi
    task = spec.task

    def draw(coef, n, rng):
        X = _gaussian(rng, n, chol)
        eta = X @ coef
        if task is Task.REGRESSION:
            y = eta + rng.standard_normal(n)
        else:
            y = (rng.random(n) < expit(eta)).astype(float)
        return Dataset(X, y, task)

    primary = draw(beta, spec.n_primary, _rng(spec.seed, 1))
    test = draw(beta, spec.n_test, _rng(spec.seed, 2))
    aux = [draw(beta + xi, spec.n_aux, _rng(spec.seed, 3, m)) for m in range(spec.M)]
    adv = [draw(-beta - xi, spec.n_primary, _rng(spec.seed, 4, m)) for m in range(spec.n_adversarial)]
    coefs = {
        "primary": beta,
        "auxiliary": [beta + xi] * spec.M,
        "adversarial": [-beta - xi] * spec.n_adversarial,
    }
    return SimData(primary, aux, adv, test, None, coefs)


def _generate_sparse(spec: GeneratorSpec) -> SimData:
    p = spec.p
    beta = np.zeros(p)
    beta[:SPARSE_ACTIVE] = SPARSE_VALUE

    def draw(coef, n, rng):
        X = rng.standard_normal((n, p))
        return Dataset(X, X @ coef + rng.standard_normal(n), Task.REGRESSION)

    def shifted(rng):
        extra = SPARSE_ACTIVE + rng.choice(p - SPARSE_ACTIVE, SPARSE_EXTRA, replace=False)
        v = np.zeros(p)
        v[:SPARSE_ACTIVE] = 2 * spec.xi
        v[extra] = 2 * spec.xi
        return beta + v

    primary = draw(beta, spec.n_primary, _rng(spec.seed, 1))
    test = draw(beta, spec.n_test, _rng(spec.seed, 2))
    aux, aux_coef = [], []
    for m in range(spec.M):
        rng = _rng(spec.seed, 3, m)
        aux_coef.append(shifted(rng))
        aux.append(draw(aux_coef[-1], spec.n_aux, rng))
    adv, adv_coef = [], []
    for m in range(spec.n_adversarial):
        rng = _rng(spec.seed, 4, m)
        adv_coef.append(-shifted(rng))
        adv.append(draw(adv_coef[-1], spec.n_primary, rng))
    coefs = {"primary": beta, "auxiliary": aux_coef, "adversarial": adv_coef}
    return SimData(primary, aux, adv, test, frozenset(range(SPARSE_ACTIVE)), coefs)


def _generate_mixture(spec: GeneratorSpec, chol) -> SimData:
    p = spec.p
    direction = np.zeros(p)
    direction[:MIXTURE_ACTIVE] = 1.0

    def components(mu, rng):
        pos = rng.normal(mu * direction, 1.0, (MIXTURE_COMPONENTS, p))
        neg = rng.normal(-mu * direction, 1.0, (MIXTURE_COMPONENTS, p))
        return pos, neg

    def draw(means, n, rng):
        pos, neg = means
        y = np.zeros(n)
        y[: (n + 1) // 2] = 1.0
        y = y[rng.permutation(n)]
        comp = rng.integers(0, MIXTURE_COMPONENTS, n)
        centers = np.where(y[:, None] == 1.0, pos[comp], neg[comp])
        return Dataset(centers + _gaussian(rng, n, chol), y, Task.CLASSIFICATION)

    mu = 1.0
    primary_means = components(mu, _rng(spec.seed, 0))
    primary = draw(primary_means, spec.n_primary, _rng(spec.seed, 1))
    test = draw(primary_means, spec.n_test, _rng(spec.seed, 2))
    aux = []
    for m in range(spec.M):
        rng = _rng(spec.seed, 3, m)
        aux.append(draw(components(mu + spec.xi, rng), spec.n_aux, rng))
    adv = []
    for m in range(spec.n_adversarial):
        rng = _rng(spec.seed, 4, m)
        adv.append(draw(components(-mu - spec.xi, rng), spec.n_primary, rng))
    return SimData(primary, aux, adv, test, None)


# -- experiments ------------------------------------------------------------


@dataclass(frozen=True)
class ResultRow:
    method: str
    M: int
    xi: float
    replication: int
    error: float


@dataclass(frozen=True)
class SummaryRow:
    method: str
    M: int
    xi: float
    mean: float
    sd: Optional[float]
    se: Optional[float]
    n_reps: int


@dataclass
class ExperimentResult:
    rows: list = field(default_factory=list)
    importance: list = field(default_factory=list)

    def sorted(self) -> "ExperimentResult":
        key = lambda r: (r.method, r.M, r.xi, r.replication)
        imp_key = lambda r: (r[0], r[1], r[2], r[3])
        return ExperimentResult(sorted(self.rows, key=key), sorted(self.importance, key=imp_key))

    def extend(self, other: "ExperimentResult"):
        self.rows.extend(other.rows)
        self.importance.extend(other.importance)

    def errors(self, method: str, M: Optional[int] = None, xi: Optional[float] = None) -> np.ndarray:
        """Per-replication errors for one cell, ordered by replication."""
        rows = [
            r
            for r in self.rows
            if r.method == method and (M is None or r.M == M) and (xi is None or math.isclose(r.xi, xi))
        ]
        return np.array([r.error for r in sorted(rows, key=lambda r: r.replication)])

    def summary(self) -> list:
        return summarize(self)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "M", "xi", "replication", "error"])
        for r in self.sorted().rows:
            w.writerow([r.method, r.M, _fmt(r.xi), r.replication, _fmt(r.error)])
        return buf.getvalue()

    def summary_csv(self) -> str:
        return summary_to_csv(summarize(self))

    def importance_csv(self) -> str:
        """Per-replication variable importance: ``method,M,xi,replication,feature,importance``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "M", "xi", "replication", "feature", "importance"])
        for method, M, xi, rep, vi in self.sorted().importance:
            for j, v in enumerate(vi):
                w.writerow([method, M, _fmt(xi), rep, j, _fmt(v)])
        return buf.getvalue()


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def summarize(result: ExperimentResult) -> list:
    """Mean, sample SD and standard error per (method, M, xi).

    SD and SE are ``None`` for a single replication.
    """
    cells = {}
    for r in result.rows:
        cells.setdefault((r.method, r.M, r.xi), []).append(r.error)
    out = []
    for (method, M, xi), errs in sorted(cells.items()):
        errs = np.asarray(errs, dtype=float)
        k = errs.size
        mean = float(errs.mean())
        sd = float(errs.std(ddof=1)) if k > 1 else None
        se = sd / math.sqrt(k) if sd is not None else None
        out.append(SummaryRow(method, M, xi, mean, sd, se, k))
    return out


def summary_to_csv(summary: Iterable[SummaryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "M", "xi", "mean", "sd", "se", "n_reps"])
    for s in summary:
        w.writerow([s.method, s.M, _fmt(s.xi), _fmt(s.mean), _fmt(s.sd), _fmt(s.se), s.n_reps])
    return buf.getvalue()


def _test_error(task: Task, pred: np.ndarray, y: np.ndarray) -> float:
    if task is Task.REGRESSION:
        return float(np.mean((pred - y) ** 2))
    return float(np.mean((pred > 0.5) != (y == 1.0)))


def _default_loss(task: Task) -> Loss:
    return Loss.squared() if task is Task.REGRESSION else Loss.cross_entropy()


def _replication_seed(seed: int, rep: int) -> int:
    return int(np.random.SeedSequence([int(seed), 7, rep]).generate_state(1)[0])


def run_replication(
    spec: GeneratorSpec,
    Ms: Sequence[int],
    methods: Sequence[Method],
    learners: Sequence[LearnerSpec],
    rep: int,
    art_config: ArtConfig = ArtConfig(),
    loss: Optional[Loss] = None,
    importance: bool = False,
) -> ExperimentResult:
    """One replication of a sweep over ``Ms`` at a fixed ``spec.xi``.

    Data are drawn once with ``max(Ms)`` auxiliaries and sliced, so the
    pools are nested and ART fits are shared between sweep points.
    """
    seed = _replication_seed(spec.seed, rep)
    data = generate(replace(spec, M=max(Ms), seed=seed))
    task = spec.task
    loss = loss or _default_loss(task)
    config = replace(art_config, seed=seed)
    y_test, X_test = data.test.response, data.test.features
    out = ExperimentResult()

    def record(method, M, model):
        out.rows.append(ResultRow(method, M, spec.xi, rep, _test_error(task, model.predict(X_test), y_test)))

    primary_fits = {}
    caches = {l.name: {} for l in learners}
    iam_cache = {}
    for M in Ms:
        # adversarial samples go first so dataset indices stay fixed as M grows
        pool = data.adversarials + data.auxiliaries[:M]
        for learner in learners:
            if Method.PRIMARY_ONLY in methods:
                if learner.name not in primary_fits:
                    primary_fits[learner.name] = learner.fit(data.primary, seed=seed)
                record(learner.name, M, primary_fits[learner.name])
            if Method.POOLED in methods:
                pooled = data.primary
                for d in pool:
                    pooled = stack(pooled, d)
                record(f"pool-{learner.name}", M, learner.fit(pooled, seed=seed))
            if Method.ART in methods:
                model = art_fit(data.primary, pool, learner, loss, config, cache=caches[learner.name])
                record(f"ART-{learner.name}", M, model)
                if importance:
                    vi = variable_importance(model).vi
                    out.importance.append((f"ART-{learner.name}", M, spec.xi, rep, tuple(vi)))
        if Method.ART_IAM in methods:
            model = art_iam_fit(data.primary, pool, learners, loss, config, cache=iam_cache)
            record("ART-I-AM", M, model)
    return out


def run_experiment(
    spec: GeneratorSpec,
    methods: Sequence[Method],
    learners: Sequence[LearnerSpec],
    replications: int,
    Ms: Optional[Sequence[int]] = None,
    art_config: ArtConfig = ArtConfig(),
    loss: Optional[Loss] = None,
    importance: bool = False,
    n_jobs: int = 1,
) -> ExperimentResult:
    """Replicate a sweep over ``Ms`` (default ``[spec.M]``) at ``spec.xi``.

    Replication ``r`` draws its data from a seed derived from
    ``(spec.seed, r)``; rows are returned sorted by
    (method, M, xi, replication), so the output does not depend on
    ``n_jobs``.
    """
    if replications < 1:
        raise ConfigurationError("replications must be >= 1")
    methods = [Method(m) for m in methods]
    learners = list(learners)
    if not learners:
        raise ConfigurationError("need at least one learner")
    for l in learners:
        if spec.task not in l.tasks:
            raise ConfigurationError(f"learner {l.name!r} cannot handle {spec.task.value} data")
    if Method.ART_IAM in methods and len(learners) < 2:
        raise ConfigurationError("ART_IAM needs at least two learners")
    Ms = list(Ms) if Ms is not None else [spec.M]
    if any(M < 0 for M in Ms):
        raise ConfigurationError("M must be >= 0")
    spec.validate()

    def job(rep):
        return run_replication(spec, Ms, methods, learners, rep, art_config, loss, importance)

    result = ExperimentResult()
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as ex:
            parts = list(ex.map(job, range(replications)))
    else:
        parts = [job(r) for r in range(replications)]
    for part in parts:
        result.extend(part)
    return result.sorted()


def run_split_protocol(
    spec: GeneratorSpec,
    learners: Sequence[LearnerSpec],
    n_evals: int = 50,
    n_train: int = 50,
    art_config: ArtConfig = ArtConfig(),
    loss: Optional[Loss] = None,
) -> ExperimentResult:
    """Repeated train/evaluate splits of one fixed primary sample.

    The data are drawn once from ``spec``. Each evaluation round puts
    ``n_train`` random primary rows into training and scores every method on
    the remaining primary rows, with all ``spec.M`` auxiliary samples
    available. Methods are primary-only, pooled and ART for each learner,
    plus ART-I-AM over all learners; ``replication`` holds the round index.
    """
    spec.validate()
    learners = list(learners)
    if len(learners) < 2:
        raise ConfigurationError("the split protocol compares ART-I-AM and needs at least two learners")
    if not 2 <= n_train < spec.n_primary:
        raise ConfigurationError(f"n_train must lie in [2, {spec.n_primary - 1}], got {n_train}")
    if n_evals < 1:
        raise ConfigurationError("n_evals must be >= 1")
    data = generate(spec)
    loss = loss or _default_loss(spec.task)
    pooled_aux = list(data.adversarials) + list(data.auxiliaries)
    out = ExperimentResult()
    for e in range(n_evals):
        seed = _replication_seed(spec.seed, e)
        order = np.random.default_rng(seed).permutation(spec.n_primary)
        train = data.primary.subset(np.sort(order[:n_train]))
        held = data.primary.subset(np.sort(order[n_train:]))
        config = replace(art_config, seed=seed)

        def record(method, model):
            err = _test_error(spec.task, model.predict(held.features), held.response)
            out.rows.append(ResultRow(method, spec.M, spec.xi, e, err))

        pooled = train
        for d in pooled_aux:
            pooled = stack(pooled, d)
        for learner in learners:
            record(learner.name, learner.fit(train, seed=seed))
            record(f"pool-{learner.name}", learner.fit(pooled, seed=seed))
            record(f"ART-{learner.name}", art_fit(train, pooled_aux, learner, loss, config))
        record("ART-I-AM", art_iam_fit(train, pooled_aux, learners, loss, config))
    return out.sorted()
