"""Exponential weights over a pool of candidate models.

All weights are computed in the log domain: ``log(prior) - lam * loss`` is
shifted by its maximum before exponentiating, so cumulative losses in the
thousands do not underflow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ConfigurationError, DataError

#: An auxiliary sample counts as "much larger" than the primary one above this ratio.
LARGE_AUX_RATIO = 10


@dataclass(frozen=True)
class PriorWeights:
    """Nonnegative prior weights, normalised to sum to one on construction."""

    pi: np.ndarray

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float).reshape(-1)
        if pi.size == 0:
            raise ConfigurationError("priors need at least one candidate")
        if not np.all(np.isfinite(pi)) or np.any(pi < 0):
            raise ConfigurationError("priors must be finite and nonnegative")
        total = pi.sum()
        if total <= 0:
            raise ConfigurationError("priors must not all be zero")
        pi = pi / total
        pi.setflags(write=False)
        object.__setattr__(self, "pi", pi)

    @classmethod
    def uniform(cls, k: int) -> "PriorWeights":
        return cls(np.full(k, 1.0 / k))

    def __len__(self):
        return self.pi.size


@dataclass(frozen=True)
class WeightTrace:
    """Weights of every candidate at every test position.

    ``sequential[:, i]`` are the weights used at test position ``i``;
    ``cumulative_losses[:, i]`` is the loss accumulated strictly before
    ``i`` (so its first column is zero). ``final`` is the row mean of
    ``sequential``.
    """

    sequential: np.ndarray
    final: np.ndarray
    lam: float
    cumulative_losses: np.ndarray


def _check_lambda(lam):
    if not (np.isfinite(lam) and lam > 0):
        raise ConfigurationError(f"lambda must be positive and finite, got {lam}")


def _softmax_columns(logits: np.ndarray) -> np.ndarray:
    top = logits.max(axis=0, keepdims=True)
    w = np.exp(logits - top)
    return w / w.sum(axis=0, keepdims=True)


def _as_priors(priors, k) -> PriorWeights:
    if not isinstance(priors, PriorWeights):
        priors = PriorWeights(priors)
    if len(priors) != k:
        raise DataError(f"{len(priors)} priors for {k} candidates")
    return priors


def sequential_weights(priors, test_losses, lam: float) -> WeightTrace:
    """Cumulative exponential weights over the test positions.

    Args:
        priors: ``PriorWeights`` or array of length ``k``.
        test_losses: (k, n_test) matrix, candidate losses in test order.
        lam: temperature, > 0.

    Column 0 equals the priors; column ``i`` weighs candidate ``m`` by
    ``pi_m * exp(-lam * sum(test_losses[m, :i]))``.
    """
    _check_lambda(lam)
    losses = np.asarray(test_losses, dtype=float)
    if losses.ndim != 2:
        raise DataError("test_losses must be a (candidates, positions) matrix")
    if losses.shape[1] == 0:
        raise DataError("no test positions: the test part is empty")
    if not np.all(np.isfinite(losses)):
        raise DataError("test losses must be finite")
    if np.any(losses < 0):
        raise DataError("test losses must be nonnegative")
    priors = _as_priors(priors, losses.shape[0])

    cum = np.zeros_like(losses)
    np.cumsum(losses[:, :-1], axis=1, out=cum[:, 1:])
    with np.errstate(divide="ignore"):
        log_pi = np.log(priors.pi)[:, None]
    seq = _softmax_columns(log_pi - lam * cum)
    return WeightTrace(sequential=seq, final=seq.mean(axis=1), lam=float(lam), cumulative_losses=cum)


def simplified_weights(priors, total_test_losses, lam: float) -> np.ndarray:
    """One-shot weights ``pi_m * exp(-lam * total_loss_m)``, normalised."""
    _check_lambda(lam)
    totals = np.asarray(total_test_losses, dtype=float).reshape(-1)
    if not np.all(np.isfinite(totals)):
        raise DataError("test losses must be finite")
    if np.any(totals < 0):
        raise DataError("test losses must be nonnegative")
    priors = _as_priors(priors, totals.size)
    with np.errstate(divide="ignore"):
        logits = np.log(priors.pi) - lam * totals
    return _softmax_columns(logits[:, None])[:, 0]


def default_lambda(n_train: int, aux_sizes: Sequence[int], n_test: int) -> float:
    """Temperature rule of thumb.

    Returns 1 unless the largest auxiliary sample exceeds
    ``LARGE_AUX_RATIO`` times the primary size ``n_train + n_test``, in
    which case ``(n_train + max(aux_sizes)) / n_test``.
    """
    if n_test < 1:
        raise ConfigurationError("n_test must be at least 1")
    if len(aux_sizes) == 0:
        return 1.0
    biggest = max(aux_sizes)
    if biggest > LARGE_AUX_RATIO * (n_train + n_test):
        return (n_train + biggest) / n_test
    return 1.0
