"""End-to-end acceptance checks.

Each test prints one PASS/FAIL line (also collected in the terminal
summary) and then asserts the same condition. Simulation sizes follow the
named suites in ``artlearn.suites``.
"""

import math
import subprocess
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from artlearn.core import Loss
from artlearn.learners import ols
from artlearn.pipeline import ArtConfig, art_fit
from artlearn.simbench import GeneratorKind, GeneratorSpec, generate
from artlearn.suites import M_SWEEP, build_suite, run_sweeps
from artlearn.weighting import sequential_weights, simplified_weights
from oracles import naive_sequential, recursive_next_column

TESTS = Path(__file__).parent


def _sweep(name, reps=None, **spec_changes):
    sweeps, default_reps = build_suite(name, "full", seed=0)
    sw = sweeps[0]
    if spec_changes:
        sw = replace(sw, spec=replace(sw.spec, **spec_changes))
    return sw, reps or default_reps


def _stats(result, method):
    by_M = {s.M: s for s in result.summary() if s.method == method}
    return np.array([by_M[M].mean for M in M_SWEEP]), np.array([by_M[M].se for M in M_SWEEP])


def _fmt(values):
    return "[" + " ".join(f"{v:.3f}" for v in values) + "]"


class TestAcceptance:
    def test_1_weighting_oracle(self, verdict):
        rng = np.random.default_rng(2024)
        start = time.perf_counter()
        seq_err = simp_err = 0.0
        for _ in range(1000):
            k, n = int(rng.integers(1, 6)), int(rng.integers(1, 21))
            pi = rng.dirichlet(np.ones(k))
            losses = rng.uniform(0, 10, (k, n))
            lam = float(rng.uniform(0.01, 3))
            tr = sequential_weights(pi, losses, lam)
            seq_err = max(seq_err, np.max(np.abs(tr.sequential - naive_sequential(pi, losses.tolist(), lam))))
            w = simplified_weights(pi, losses.sum(axis=1), lam)
            simp_err = max(simp_err, np.max(np.abs(w - recursive_next_column(pi, losses.tolist(), lam))))
        elapsed = time.perf_counter() - start
        ok = seq_err <= 1e-12 and simp_err <= 1e-12 and elapsed < 5
        verdict(
            "1 weighting oracle",
            ok,
            f"max |seq - naive| = {seq_err:.1e}, max |simplified - recursion| = {simp_err:.1e}, {elapsed:.1f} s",
        )
        assert ok

    def test_2_linear_regression_pattern(self, verdict):
        sw, reps = _sweep("ex411")
        start = time.perf_counter()
        result = run_sweeps([sw], reps)
        elapsed = time.perf_counter() - start
        ls, _ = _stats(result, "LS")
        art, art_se = _stats(result, "ART-LS")
        pool, _ = _stats(result, "pool-LS")
        rho = spearmanr(M_SWEEP, pool)[0]
        ok = bool(np.all(art < ls)) and ls[-1] - art[-1] > art_se[-1] and rho > 0.8 and elapsed < 120
        verdict(
            "2 ART-LS below LS",
            ok,
            f"LS {ls[0]:.3f}; ART-LS by M {_fmt(art)} (SE at M=10 {art_se[-1]:.3f}); "
            f"pool-LS Spearman {rho:.2f}; {elapsed:.0f} s",
        )
        assert ok

    def test_3_adversarial_robustness(self, verdict):
        clean_sw, reps = _sweep("ex411")
        adv_sw, _ = _sweep("ex412")
        assert adv_sw.spec.n_adversarial == 10
        start = time.perf_counter()
        clean = run_sweeps([clean_sw], reps)
        noisy = run_sweeps([adv_sw], reps)
        elapsed = time.perf_counter() - start
        art_clean, _ = _stats(clean, "ART-LS")
        art_noisy, _ = _stats(noisy, "ART-LS")
        change = np.abs(art_noisy - art_clean) / art_clean
        ls, _ = _stats(noisy, "LS")
        pool, _ = _stats(noisy, "pool-LS")
        ok = bool(np.all(change < 0.10)) and pool[0] > 10 * ls[0] and elapsed < 180
        verdict(
            "3 adversarial robustness",
            ok,
            f"max relative ART-LS change {change.max():.3f}; pool-LS at M=1 {pool[0]:.2f} vs LS {ls[0]:.3f}; "
            f"{elapsed:.0f} s",
        )
        assert ok

    def test_4_oracle_inequality(self, verdict):
        reps, M = 50, 10
        art_loss, cand_loss = [], []
        n_tilde = None
        for r in range(reps):
            spec = GeneratorSpec.defaults(GeneratorKind.LINEAR_REGRESSION, M=M, xi=0.5, seed=10_000 + r)
            d = generate(spec)
            model = art_fit(d.primary, d.auxiliaries, ols(), Loss.squared(), ArtConfig(lam=1.0, seed=r))
            X, y = d.test.features, d.test.response
            art_loss.append(np.mean((model.predict(X) - y) ** 2))
            cand_loss.append([np.mean((g.predict(X) - y) ** 2) for g in model.candidates])
            n_tilde = d.primary.n - int(np.floor(0.5 * d.primary.n))
        art_loss, cand_loss = np.array(art_loss), np.array(cand_loss)
        best = cand_loss.mean(axis=0).min()
        se = art_loss.std(ddof=1) / math.sqrt(reps)
        bound = best + math.log(M + 1) / n_tilde + 3 * se
        ok = art_loss.mean() <= bound
        verdict(
            "4 oracle inequality",
            ok,
            f"ART {art_loss.mean():.3f} <= best candidate {best:.3f} + log(11)/{n_tilde} + 3 SE = {bound:.3f}",
        )
        assert ok

    def test_5_logistic_pattern(self, verdict):
        sw, reps = _sweep("ex421")
        start = time.perf_counter()
        result = run_sweeps([sw], reps)
        elapsed = time.perf_counter() - start
        logit, _ = _stats(result, "logit")
        art, _ = _stats(result, "ART-logit")
        ok = bool(np.all(art[2:] <= logit[2:])) and elapsed < 120
        verdict("5 ART-logit below logit for M >= 3", ok, f"logit {logit[0]:.3f}; ART-logit by M {_fmt(art)}; {elapsed:.0f} s")
        assert ok

    def test_6_sparse_pattern(self, verdict):
        sw, _ = _sweep("ex431")
        start = time.perf_counter()
        result = run_sweeps([sw], 20)
        elapsed = time.perf_counter() - start
        lasso, _ = _stats(result, "lasso")
        art, art_se = _stats(result, "ART-lasso")
        ok = bool(np.all(art <= lasso)) and lasso[-1] - art[-1] > art_se[-1] and elapsed < 300
        verdict(
            "6 ART-lasso below lasso",
            ok,
            f"lasso {lasso[0]:.3f}; ART-lasso by M {_fmt(art)} (SE at M=10 {art_se[-1]:.3f}); {elapsed:.0f} s",
        )
        assert ok

    def test_7_importance_spectrum(self, verdict):
        sw, _ = _sweep("vi_spectrum", n_test=100)
        assert sw.spec.xi == 0.1 and sw.Ms == (5,)

        def mean_importance(sweep):
            result = run_sweeps([sweep], 20)
            return np.array([vi for *_, vi in result.importance]).mean(axis=0)

        small = mean_importance(sw)
        large = mean_importance(replace(sw, spec=replace(sw.spec, n_primary=600)))
        active = sorted(generate(replace(sw.spec, M=0, n_test=1)).truth)
        inactive = np.setdiff1d(np.arange(sw.spec.p), active)
        act_small, act_large = small[active].mean(), large[active].mean()
        worst = small[inactive].max()
        ok = act_small > 0.9 and worst < 0.2 and act_large >= act_small - 0.02
        verdict(
            "7 importance spectrum",
            ok,
            f"active mean {act_small:.3f}; inactive max {worst:.3f} (inactive mean {small[inactive].mean():.3f}); "
            f"active mean at n0=600 {act_large:.3f}",
        )
        assert ok

    def test_8_integrated_machine(self, verdict):
        sw, reps = _sweep("icu_style")
        result = run_sweeps([sw], reps)
        means = {s.method: s.mean for s in result.summary()}
        best_name = min((m for m in means if m.startswith("ART-") and m != "ART-I-AM"), key=means.get)
        ok = means["ART-I-AM"] <= means[best_name] + 0.02
        verdict(
            "8 ART-I-AM near best single-learner ART",
            ok,
            f"ART-I-AM {means['ART-I-AM']:.4f} vs {best_name} {means[best_name]:.4f} over {reps} splits",
        )
        assert ok

    def test_9_invariant_suite(self, verdict):
        nodes = [
            "test_weighting.py::TestSequentialProperties",
            "test_weighting.py::TestSequentialWeights::test_tiny_lambda_returns_priors",
            "test_pipeline.py::TestInvariants",
            "test_learners.py::TestLasso::test_subgradient_optimality",
            "test_simbench.py::TestRunExperiment::test_threads_do_not_change_rows",
        ]
        start = time.perf_counter()
        out = subprocess.run(
            [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *nodes],
            cwd=TESTS,
            capture_output=True,
            text=True,
        )
        elapsed = time.perf_counter() - start
        ok = out.returncode == 0 and elapsed < 60
        tail = out.stdout.strip().splitlines()[-1] if out.stdout.strip() else out.stderr.strip()
        verdict("9 invariant suite", ok, f"{tail}; {elapsed:.1f} s")
        assert ok, out.stdout
