"""Named benchmark suites run by ``artlearn sim``.

Each suite is a list of sweeps; a sweep fixes a generator spec and varies
either the number of auxiliary samples or their shift. ``fast`` runs 10
replications on 1000 test points, ``full`` runs 50 on 5000.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Sequence

from .core import ConfigurationError
from .learners import adaboost, knn, lasso_cv, logistic, ols
from .pipeline import ArtConfig
from .simbench import ExperimentResult, GeneratorKind, GeneratorSpec, Method, run_experiment, run_split_protocol

PROFILES = {"full": dict(replications=50, n_test=5000), "fast": dict(replications=10, n_test=1000)}
M_SWEEP = tuple(range(1, 11))
XI_GRID = tuple(round(0.1 * k, 1) for k in range(1, 11))
VI_XI = (0.1, 0.4, 0.7, 1.0)
BASE_XI = 0.5

_BASELINES = (Method.PRIMARY_ONLY, Method.POOLED, Method.ART)


@dataclass(frozen=True)
class Sweep:
    spec: GeneratorSpec
    Ms: tuple
    learners: tuple
    methods: tuple = _BASELINES
    importance: bool = False
    split_protocol: bool = False

    def describe(self) -> dict:
        spec = asdict(self.spec)
        spec["kind"] = self.spec.kind.value
        return {
            "spec": spec,
            "Ms": list(self.Ms),
            "methods": [m.value for m in self.methods],
            "learners": [l.name for l in self.learners],
            "importance": self.importance,
            "split_protocol": self.split_protocol,
        }


def _m_and_xi(kind, learners, seed, n_test, panel_M, methods=_BASELINES, **overrides):
    """M sweep at the base shift, then a shift sweep at ``panel_M``."""
    base = GeneratorSpec.defaults(kind, xi=BASE_XI, seed=seed, n_test=n_test, **overrides)
    sweeps = [Sweep(base, M_SWEEP, learners, methods)]
    for xi in XI_GRID:
        if xi != BASE_XI:  # that cell is already part of the M sweep
            sweeps.append(Sweep(replace(base, xi=xi), (panel_M,), learners, methods))
    return sweeps


def build_suite(name: str, profile: str = "full", seed: int = 0) -> tuple:
    """Return ``(sweeps, replications)`` for a named suite."""
    if profile not in PROFILES:
        raise ConfigurationError(f"unknown profile {profile!r}; valid profiles: {', '.join(PROFILES)}")
    reps, n_test = PROFILES[profile]["replications"], PROFILES[profile]["n_test"]
    lin, logit, mix, sparse = (
        GeneratorKind.LINEAR_REGRESSION,
        GeneratorKind.LOGISTIC_CLASSIFICATION,
        GeneratorKind.GAUSSIAN_MIXTURE,
        GeneratorKind.SPARSE_LINEAR,
    )
    if name == "ex411":
        sweeps = _m_and_xi(lin, (ols(),), seed, n_test, panel_M=10)
    elif name == "ex412":
        sweeps = _m_and_xi(lin, (ols(),), seed, n_test, panel_M=10, n_adversarial=10)
    elif name == "ex421":
        sweeps = _m_and_xi(logit, (logistic(),), seed, n_test, panel_M=5)
    elif name == "ex422":
        methods = _BASELINES + (Method.ART_IAM,)
        sweeps = _m_and_xi(mix, (logistic(), knn(), adaboost()), seed, n_test, panel_M=10, methods=methods)
    elif name == "ex431":
        sweeps = _m_and_xi(sparse, (lasso_cv(rule="1se"),), seed, n_test, panel_M=10, methods=(Method.PRIMARY_ONLY, Method.ART))
    elif name == "vi_spectrum":
        base = GeneratorSpec.defaults(sparse, seed=seed, n_test=n_test)
        sweeps = [
            Sweep(replace(base, xi=xi), (5,), (lasso_cv(rule="1se"),), (Method.ART,), importance=True) for xi in VI_XI
        ]
    elif name == "icu_style":
        spec = GeneratorSpec.defaults(mix, n_primary=72, n_aux=200, M=3, xi=BASE_XI, seed=seed, n_test=n_test)
        sweeps = [Sweep(spec, (3,), (logistic(), knn(), adaboost()), _BASELINES + (Method.ART_IAM,), split_protocol=True)]
    else:
        raise ConfigurationError(f"unknown simulation {name!r}; valid names: {', '.join(SIM_NAMES)}")
    return sweeps, reps


SIM_NAMES = ("ex411", "ex412", "ex421", "ex422", "ex431", "vi_spectrum", "icu_style")


def run_sweeps(sweeps: Sequence[Sweep], replications: int, art_config: ArtConfig = ArtConfig(), n_jobs: int = 1) -> ExperimentResult:
    result = ExperimentResult()
    for sw in sweeps:
        if sw.split_protocol:
            part = run_split_protocol(sw.spec, sw.learners, n_evals=replications, art_config=art_config)
        else:
            part = run_experiment(
                sw.spec,
                sw.methods,
                sw.learners,
                replications,
                Ms=sw.Ms,
                art_config=art_config,
                importance=sw.importance,
                n_jobs=n_jobs,
            )
        result.extend(part)
    return result.sorted()
