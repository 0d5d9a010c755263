"""
Exponential weights over test positions
=======================================

Two candidates are scored on the same held-out rows. Each weight column is
the prior tilted by the losses seen so far; the final weights average the
columns.
"""

import numpy as np

from artlearn.weighting import sequential_weights, simplified_weights

# candidate 0 is slightly better on average
rng = np.random.default_rng(0)
losses = np.vstack([rng.exponential(1.0, 12), rng.exponential(1.4, 12)])
prior = [0.5, 0.5]

trace = sequential_weights(prior, losses, lam=1.0)
np.set_printoptions(precision=3, suppress=True)
print("weights of candidate 0 at each position:")
print(trace.sequential[0])
print("final weights:", trace.final)

# the one-shot form sees only the total loss, so the last positions count in full
print("simplified weights:", simplified_weights(prior, losses.sum(axis=1), lam=1.0))

# a larger temperature concentrates the weights faster
for lam in (0.1, 1.0, 10.0):
    print(f"lambda={lam:5.1f} final={sequential_weights(prior, losses, lam).final}")
