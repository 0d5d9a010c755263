"""
Aggregating several classifiers at once
=======================================

Every (dataset, learner) pair becomes a candidate, so the choice of
classifier is made by the weights instead of by a separate tuning loop.
"""

import numpy as np

from artlearn import Loss, adaboost, art_fit, art_iam_fit, knn, logistic
from artlearn.pipeline import ArtConfig
from artlearn.simbench import GeneratorKind, GeneratorSpec, generate

spec = GeneratorSpec.defaults(GeneratorKind.GAUSSIAN_MIXTURE, M=3, xi=0.5, n_test=2000, seed=7)
data = generate(spec)
X, y = data.test.features, data.test.response
learners = [logistic(), knn(k=7), adaboost(n_rounds=100)]
config = ArtConfig(seed=2)


def error(model):
    return np.mean((model.predict(X) > 0.5) != y)


for learner in learners:
    single = art_fit(data.primary, data.auxiliaries, learner, Loss.cross_entropy(), config)
    print(f"ART-{learner.name:9s} {error(single):.3f}")

model = art_iam_fit(data.primary, data.auxiliaries, learners, Loss.cross_entropy(), config)
print(f"ART-I-AM      {error(model):.3f}")

# total weight per learner across the four datasets
R = len(learners)
for r, learner in enumerate(learners):
    print(f"  weight on {learner.name:9s} {model.final_weights[r::R].sum():.3f}")
