"""Classifiers, cross-validation and confusion-matrix metrics."""

from .evaluation import (
    ClassMetrics,
    ConfusionMatrix,
    EvalReport,
    Metrics,
    ReductionSpec,
    assign_folds,
    cross_validate,
    metrics,
    relative_variation,
)
from .models import (
    BinarySVM,
    ClassifierSpec,
    DecisionTree,
    KNearestNeighbors,
    SupportVectorMachine,
    predict,
    train,
)

__all__ = [
    "BinarySVM",
    "ClassMetrics",
    "ClassifierSpec",
    "ConfusionMatrix",
    "DecisionTree",
    "EvalReport",
    "KNearestNeighbors",
    "Metrics",
    "ReductionSpec",
    "SupportVectorMachine",
    "assign_folds",
    "cross_validate",
    "metrics",
    "predict",
    "relative_variation",
    "train",
]
