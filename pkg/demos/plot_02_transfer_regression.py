"""
Borrowing strength from shifted samples
=======================================

A small primary sample is combined with auxiliary samples whose coefficients
are shifted. Pooling everything blindly is compared with the weighted
aggregate.
"""

import numpy as np

from artlearn import Loss, art_fit, ols
from artlearn.core import stack
from artlearn.pipeline import ArtConfig
from artlearn.simbench import GeneratorKind, GeneratorSpec, generate

spec = GeneratorSpec.defaults(GeneratorKind.LINEAR_REGRESSION, M=5, n_adversarial=2, xi=0.2, n_test=2000, seed=3)
data = generate(spec)
X, y = data.test.features, data.test.response


def mse(model):
    return np.mean((model.predict(X) - y) ** 2)


primary_only = ols().fit(data.primary)
pool = data.adversarials + data.auxiliaries
pooled = data.primary
for d in pool:
    pooled = stack(pooled, d)

model = art_fit(data.primary, pool, ols(), Loss.squared(), ArtConfig(seed=1))

print(f"primary only   {mse(primary_only):8.3f}")
print(f"pooled         {mse(ols().fit(pooled)):8.3f}")
print(f"aggregate      {mse(model):8.3f}")

# the two adversarial samples come first in the pool and get almost no weight
for g, w in zip(model.candidates, model.final_weights):
    print(f"{g.label:8s} {w:.3f}")
