"""Cross-validation, confusion matrices and per-class metrics."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..garch import FeatureMatrix
from ..reduce import Kernel, reduce_pipeline
from .models import ClassifierSpec, train

__all__ = [
    "ConfusionMatrix",
    "ClassMetrics",
    "Metrics",
    "EvalReport",
    "ReductionSpec",
    "metrics",
    "relative_variation",
    "assign_folds",
    "cross_validate",
]


@dataclass
class ConfusionMatrix:
    """Counts with actual classes on rows and predicted classes on columns."""

    counts: np.ndarray
    labels: tuple

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.labels = tuple(str(lab) for lab in self.labels)
        n = len(self.labels)
        if self.counts.shape != (n, n):
            raise ConfigError(f"confusion matrix must be {n}x{n}")
        if np.any(self.counts < 0):
            raise ConfigError("confusion counts must be nonnegative")

    @classmethod
    def from_predictions(cls, actual, predicted, labels=None):
        actual = np.asarray(actual).astype(str)
        predicted = np.asarray(predicted).astype(str)
        if labels is None:
            labels = sorted(set(actual.tolist()) | set(predicted.tolist()))
        pos = {lab: i for i, lab in enumerate(labels)}
        counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
        for a, p in zip(actual, predicted):
            counts[pos[a], pos[p]] += 1
        return cls(counts, tuple(labels))

    @property
    def total(self):
        return int(self.counts.sum())

    def to_rows(self, with_metrics=True):
        header = ["actual/predicted", *self.labels]
        m = metrics(self) if with_metrics else None
        if m is not None:
            header += ["Sens.", "Prec."]
        rows = [header]
        for i, lab in enumerate(self.labels):
            row = [lab, *(int(c) for c in self.counts[i])]
            if m is not None:
                row += [m.per_class[i].sensitivity, m.per_class[i].precision]
            rows.append(row)
        return rows

    def write_csv(self, path):
        from ..signalio import format_float

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for row in self.to_rows():
                w.writerow([format_float(v) if isinstance(v, float) else v for v in row])


@dataclass(frozen=True)
class ClassMetrics:
    label: str
    sensitivity: float
    precision: float
    f_score: float
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class Metrics:
    per_class: tuple
    accuracy: float
    f_score: float
    flags: tuple = ()

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "f_score": self.f_score,
            "per_class": [
                {
                    "label": c.label,
                    "sensitivity": c.sensitivity,
                    "precision": c.precision,
                    "f_score": c.f_score,
                    "tp": c.tp,
                    "fp": c.fp,
                    "fn": c.fn,
                }
                for c in self.per_class
            ],
            "flags": list(self.flags),
        }


def metrics(confusion):
    """One-vs-rest sensitivity, precision, F-score per class; accuracy in percent.

    The aggregate F-score is the unweighted mean of per-class F-scores.
    An undefined ratio (zero denominator) is reported as 1.0 when the class
    has no errors of the complementary kind and 0.0 otherwise, and flagged.
    """
    C = confusion.counts
    total = C.sum()
    if total <= 0:
        raise ConfigError("confusion matrix is empty")
    flags = []
    per = []
    for i, lab in enumerate(confusion.labels):
        tp = int(C[i, i])
        fn = int(C[i].sum() - tp)
        fp = int(C[:, i].sum() - tp)
        if tp + fn > 0:
            sens = tp / (tp + fn)
        else:
            sens = 1.0 if fp == 0 else 0.0
            flags.append(f"sensitivity undefined for {lab}")
        if tp + fp > 0:
            prec = tp / (tp + fp)
        else:
            prec = 1.0 if fn == 0 else 0.0
            flags.append(f"precision undefined for {lab}")
        denom = 2 * tp + fp + fn
        f = 2 * tp / denom if denom > 0 else 1.0
        per.append(ClassMetrics(lab, sens, prec, f, tp, fp, fn))
    acc = 100.0 * float(np.trace(C)) / float(total)
    fmean = float(np.mean([c.f_score for c in per]))
    return Metrics(tuple(per), acc, fmean, tuple(flags))


def relative_variation(accuracies):
    """``100 * (max - min) / max`` of a list of accuracies."""
    acc = np.asarray(accuracies, dtype=float)
    if acc.size == 0:
        raise ConfigError("relative_variation needs at least one value")
    hi = acc.max()
    if not hi > 0:
        raise ConfigError("relative_variation needs a positive maximum")
    return float(100.0 * (hi - acc.min()) / hi)


@dataclass(frozen=True)
class ReductionSpec:
    """Reduction scenario refit inside every training fold."""

    mode: str = "SD"
    kernel: Kernel = field(default_factory=Kernel)
    ncse_threshold: float = 0.95
    ridge: float | None = None

    def to_dict(self):
        return {
            "mode": self.mode,
            "kernel": self.kernel.to_dict(),
            "ncse_threshold": self.ncse_threshold,
            "ridge": self.ridge,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if isinstance(d.get("kernel"), dict):
            d["kernel"] = Kernel(**d["kernel"])
        return cls(**d)


@dataclass
class EvalReport:
    confusion: ConfusionMatrix
    metrics: Metrics
    folds: dict
    predictions: dict
    seed: int
    classifier: ClassifierSpec
    reduction: ReductionSpec | None
    n_features: list

    @property
    def accuracy(self):
        return self.metrics.accuracy

    @property
    def f_score(self):
        return self.metrics.f_score

    def to_dict(self):
        return {
            "classifier": self.classifier.to_dict(),
            "reduction": self.reduction.to_dict() if self.reduction is not None else None,
            "seed": self.seed,
            "accuracy": self.accuracy,
            "f_score": self.f_score,
            "metrics": self.metrics.to_dict(),
            "confusion": {"labels": list(self.confusion.labels), "counts": self.confusion.counts.tolist()},
            "n_features_per_fold": list(self.n_features),
            "folds": self.folds,
            "predictions": self.predictions,
            "notes": [
                "folds are stratified random partitions unless stated otherwise",
                "standardization and reduction models are refit inside every training fold",
            ],
        }


def assign_folds(labels, folds, seed, stratified=True):
    """Fold index per row.

    Stratified mode shuffles each class separately and deals its members
    round-robin, continuing the rotation from class to class so fold sizes
    stay balanced.
    """
    labels = np.asarray(labels).astype(str)
    folds = int(folds)
    n = labels.size
    if folds < 2:
        raise ConfigError("cross-validation needs folds >= 2")
    if folds > n:
        raise ConfigError(f"cannot split {n} samples into {folds} folds")
    rng = np.random.default_rng(seed)
    out = np.empty(n, dtype=int)
    if not stratified:
        perm = rng.permutation(n)
        out[perm] = np.arange(n) % folds
        return out
    offset = 0
    for lab in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == lab)
        if idx.size < folds:
            raise ConfigError(
                f"class {lab!r} has {idx.size} samples, fewer than {folds} folds; "
                "use stratified=False for plain random folds"
            )
        idx = idx[rng.permutation(idx.size)]
        out[idx] = (offset + np.arange(idx.size)) % folds
        offset = (offset + idx.size) % folds
    return out


def cross_validate(spec, X, folds=5, seed=0, reduction=None, stratified=True):
    """K-fold cross-validation with every fitted stage refit per fold.

    Parameters
    ----------
    spec : ClassifierSpec
    X : FeatureMatrix
    folds : int
    seed : int
        Seeds the fold partition.
    reduction : ReductionSpec, optional
        Reduction scenario fitted on each training fold only.
    stratified : bool

    Returns
    -------
    EvalReport
        Confusion matrix aggregated over all test folds.
    """
    if not isinstance(X, FeatureMatrix):
        raise ConfigError("cross_validate expects a FeatureMatrix")
    if not isinstance(spec, ClassifierSpec):
        raise ConfigError("cross_validate expects a ClassifierSpec")
    fold_of = assign_folds(X.labels, folds, seed, stratified)
    labels = X.classes
    predicted = np.empty(X.n_rows, dtype=object)
    n_features = []
    seen = set()
    for f in range(int(folds)):
        test = np.flatnonzero(fold_of == f)
        tr = np.flatnonzero(fold_of != f)
        test_ids = {X.ids[i] for i in test}
        if test_ids & {X.ids[i] for i in tr}:
            raise AssertionError("training and test rows overlap")
        if test_ids & seen:
            raise AssertionError("sample assigned to more than one test fold")
        seen |= test_ids
        train_fm = X.subset(tr)
        if reduction is not None:
            models, reduced = reduce_pipeline(
                train_fm, reduction.mode, reduction.kernel, reduction.ncse_threshold, reduction.ridge
            )
            Z_train = reduced.X
            Z_test = models.transform(X.X[test])
        else:
            Z_train, Z_test = train_fm.X, X.X[test]
        n_features.append(int(Z_train.shape[1]))
        model = train(spec, Z_train, train_fm.labels)
        predicted[test] = model.predict(Z_test)
    if len(seen) != X.n_rows:
        raise AssertionError("some samples were never tested")
    cm = ConfusionMatrix.from_predictions(X.labels, predicted.astype(str), labels)
    return EvalReport(
        confusion=cm,
        metrics=metrics(cm),
        folds={rid: int(f) for rid, f in zip(X.ids, fold_of)},
        predictions={rid: str(p) for rid, p in zip(X.ids, predicted)},
        seed=int(seed),
        classifier=spec,
        reduction=reduction,
        n_features=n_features,
    )
