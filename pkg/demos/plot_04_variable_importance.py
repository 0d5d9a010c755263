"""
Which features does the aggregate rely on?
==========================================

With a sparse learner every candidate reports a selected set. Weighting
those sets by the aggregation weights gives an importance score in [0, 1].
"""

import numpy as np

from artlearn import Loss, art_fit, lasso_cv, variable_importance
from artlearn.pipeline import ArtConfig
from artlearn.simbench import GeneratorKind, GeneratorSpec, generate

spec = GeneratorSpec.defaults(GeneratorKind.SPARSE_LINEAR, M=3, xi=0.1, n_test=10, seed=5)
data = generate(spec)
model = art_fit(data.primary, data.auxiliaries, lasso_cv(rule="1se"), Loss.squared(), ArtConfig(seed=5, n_splits=3))
vi = variable_importance(model).vi

active = sorted(data.truth)
inactive = np.setdiff1d(np.arange(spec.p), active)
print(f"mean importance, active features:   {vi[active].mean():.3f}")
print(f"mean importance, inactive features: {vi[inactive].mean():.3f}")
print("ten most important features:", np.argsort(-vi, kind="stable")[:10])
