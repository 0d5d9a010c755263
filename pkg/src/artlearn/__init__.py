"""Adaptive robust transfer learning by exponential-weight aggregation."""

from .core import (
    EPS_CLIP,
    ArtError,
    ConfigurationError,
    DataError,
    Dataset,
    FittedModel,
    LearnerSpec,
    Loss,
    LossKind,
    NumericalError,
    SplitIndices,
    Task,
    UnsupportedLearnerError,
    evaluate_loss,
    read_csv,
    split_primary,
    stack,
)
from .learners import LEARNERS, adaboost, knn, lasso, lasso_cv, logistic, make_learner, ols, ridge
from .pipeline import (
    ArtConfig,
    ArtModel,
    VariableImportance,
    WeightMode,
    art_fit,
    art_iam_fit,
    art_predict,
    classify,
    variable_importance,
)
from .weighting import (
    PriorWeights,
    WeightTrace,
    default_lambda,
    sequential_weights,
    simplified_weights,
)

__version__ = "0.1.0"
