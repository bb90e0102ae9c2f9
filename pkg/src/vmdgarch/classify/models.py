"""kNN, SMO-trained one-vs-one SVM and CART decision tree classifiers."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..reduce import Kernel

__all__ = [
    "ClassifierSpec",
    "KNearestNeighbors",
    "SupportVectorMachine",
    "BinarySVM",
    "DecisionTree",
    "train",
    "predict",
]


@dataclass(frozen=True)
class ClassifierSpec:
    """Classifier kind and hyperparameters.

    ``svm_kernel`` accepts any :class:`~vmdgarch.reduce.Kernel` kind; RBF
    with ``gamma=None`` resolves its bandwidth on the training data.
    """

    kind: str = "knn"
    k: int = 5
    svm_kernel: Kernel = field(default_factory=lambda: Kernel("linear"))
    C: float = 1.0
    svm_tol: float = 1e-3
    svm_max_iter: int = 100_000
    max_splits: int = 100

    def __post_init__(self):
        if self.kind not in ("knn", "svm", "tree"):
            raise ConfigError(f"unknown classifier kind {self.kind!r}")
        if int(self.k) < 1:
            raise ConfigError("k must be >= 1")
        if not self.C > 0:
            raise ConfigError("C must be positive")
        if int(self.max_splits) < 1:
            raise ConfigError("max_splits must be >= 1")

    @property
    def name(self):
        return {"knn": "kNN", "svm": "SVM", "tree": "Fine Tree"}[self.kind]

    def to_dict(self):
        return {
            "kind": self.kind,
            "k": self.k,
            "svm_kernel": self.svm_kernel.to_dict(),
            "C": self.C,
            "svm_tol": self.svm_tol,
            "svm_max_iter": self.svm_max_iter,
            "max_splits": self.max_splits,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if isinstance(d.get("svm_kernel"), dict):
            d["svm_kernel"] = Kernel(**d["svm_kernel"])
        elif isinstance(d.get("svm_kernel"), str):
            d["svm_kernel"] = Kernel(d["svm_kernel"])
        return cls(**d)


def _check_training(X, y):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y).astype(str)
    if X.shape[0] != y.shape[0]:
        raise ConfigError("features and labels disagree in length")
    if not np.all(np.isfinite(X)):
        raise ConfigError("features contain non-finite values")
    classes = sorted(set(y.tolist()))
    if len(classes) < 2:
        raise ConfigError("training needs at least 2 classes")
    return X, y, classes


def _check_query(X, dim):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != dim:
        raise ConfigError(f"expected {dim} features, got {X.shape[1]}")
    return X


class KNearestNeighbors:
    """Euclidean k-nearest-neighbour vote.

    Vote ties go to the label whose voting neighbours have the smallest mean
    distance, then to the lexicographically smallest label.
    """

    def __init__(self, k=5):
        self.k = int(k)

    def fit(self, X, y):
        self.X_, self.y_, self.classes_ = _check_training(X, y)
        return self

    def predict(self, X):
        X = _check_query(X, self.X_.shape[1])
        d2 = (X * X).sum(1)[:, None] + (self.X_ * self.X_).sum(1)[None, :] - 2.0 * X @ self.X_.T
        dist = np.sqrt(np.maximum(d2, 0.0))
        k = min(self.k, self.X_.shape[0])
        out = []
        for row in dist:
            nn = np.argsort(row, kind="stable")[:k]
            votes = {}
            for i in nn:
                votes.setdefault(self.y_[i], []).append(row[i])
            best = min(votes, key=lambda lab: (-len(votes[lab]), float(np.mean(votes[lab])), lab))
            out.append(best)
        return np.array(out)


class BinarySVM:
    """Soft-margin SVM dual solved by SMO with maximal-violating-pair selection.

    Labels are +1/-1. Stops when the KKT gap ``max(-y G) - min(-y G)`` over
    the up/low index sets drops below ``tol``.
    """

    def __init__(self, kernel, C=1.0, tol=1e-3, max_iter=100_000):
        self.kernel = kernel
        self.C = float(C)
        self.tol = float(tol)
        self.max_iter = int(max_iter)

    def fit(self, X, y):
        y = np.asarray(y, dtype=float)
        K = self.kernel(X, X)
        n = y.size
        Q = (y[:, None] * y[None, :]) * K
        alpha = np.zeros(n)
        G = -np.ones(n)
        C = self.C
        diagQ = np.diag(Q)
        it = 0
        self.converged_ = False
        while it < self.max_iter:
            yG = -y * G
            up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
            low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
            if not up.any() or not low.any():
                self.converged_ = True
                break
            i = int(np.flatnonzero(up)[np.argmax(yG[up])])
            j = int(np.flatnonzero(low)[np.argmin(yG[low])])
            gap = yG[i] - yG[j]
            if gap < self.tol:
                self.converged_ = True
                break
            a = diagQ[i] + diagQ[j] - 2.0 * y[i] * y[j] * Q[i, j]
            if a <= 0:
                a = 1e-12
            delta = gap / a
            delta = min(delta, C - alpha[i] if y[i] > 0 else alpha[i])
            delta = min(delta, alpha[j] if y[j] > 0 else C - alpha[j])
            di = y[i] * delta
            dj = -y[j] * delta
            alpha[i] = min(max(alpha[i] + di, 0.0), C)
            alpha[j] = min(max(alpha[j] + dj, 0.0), C)
            G += Q[:, i] * di + Q[:, j] * dj
            it += 1
        self.n_iter_ = it
        self.rho_ = self._rho(alpha, y, G)
        sv = alpha > 0
        self.support_ = np.atleast_2d(X)[sv]
        self.dual_coef_ = (alpha * y)[sv]
        self.alpha_ = alpha
        return self

    def _rho(self, alpha, y, G):
        yG = y * G
        free = (alpha > 0) & (alpha < self.C)
        if free.any():
            return float(np.mean(yG[free]))
        ub, lb = np.inf, -np.inf
        at_upper = alpha >= self.C
        for t in range(y.size):
            if at_upper[t]:
                if y[t] < 0:
                    ub = min(ub, yG[t])
                else:
                    lb = max(lb, yG[t])
            else:
                if y[t] > 0:
                    ub = min(ub, yG[t])
                else:
                    lb = max(lb, yG[t])
        return float(0.5 * (ub + lb))

    def decision_function(self, X):
        if self.support_.shape[0] == 0:
            return np.full(np.atleast_2d(X).shape[0], -self.rho_)
        return self.kernel(X, self.support_) @ self.dual_coef_ - self.rho_


class SupportVectorMachine:
    """One-vs-one multiclass SVM.

    Each pairwise machine votes; vote ties go to the class with the largest
    summed signed decision value, then to the lexicographically smallest label.
    """

    def __init__(self, kernel=None, C=1.0, tol=1e-3, max_iter=100_000):
        self.kernel = kernel or Kernel("linear")
        self.C = C
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y, classes = _check_training(X, y)
        self.classes_ = classes
        self.dim_ = X.shape[1]
        self.kernel_ = self.kernel.resolve(X)
        self.machines_ = {}
        for a in range(len(classes)):
            for b in range(a + 1, len(classes)):
                mask = (y == classes[a]) | (y == classes[b])
                yy = np.where(y[mask] == classes[a], 1.0, -1.0)
                self.machines_[(a, b)] = BinarySVM(self.kernel_, self.C, self.tol, self.max_iter).fit(X[mask], yy)
        return self

    def scores(self, X):
        """Votes and summed margins, each ``(n, n_classes)``."""
        X = _check_query(X, self.dim_)
        n_c = len(self.classes_)
        votes = np.zeros((X.shape[0], n_c))
        margins = np.zeros((X.shape[0], n_c))
        for (a, b), svm in self.machines_.items():
            f = svm.decision_function(X)
            votes[:, a] += f > 0
            votes[:, b] += f <= 0
            margins[:, a] += f
            margins[:, b] -= f
        return votes, margins

    def predict(self, X):
        votes, margins = self.scores(X)
        out = []
        for v, m in zip(votes, margins):
            top = np.flatnonzero(v == v.max())
            if top.size > 1:
                mm = m[top]
                top = top[mm == mm.max()]
            out.append(self.classes_[int(top[0])])
        return np.array(out)


@dataclass
class _Node:
    idx: np.ndarray
    counts: np.ndarray
    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1


def _gini(counts):
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return 1.0 - float(p @ p)


class DecisionTree:
    """CART classifier with Gini impurity, grown best-first up to ``max_splits``.

    Nodes are split in order of largest total impurity decrease; impure
    nodes may take zero-gain splits (needed for XOR-like layouts). Leaves
    predict the majority label, ties to the smallest label.
    """

    def __init__(self, max_splits=100):
        self.max_splits = int(max_splits)

    def fit(self, X, y):
        X, y, classes = _check_training(X, y)
        self.classes_ = classes
        self.dim_ = X.shape[1]
        yi = np.searchsorted(classes, y)
        n_c = len(classes)
        self.nodes_ = [_Node(np.arange(X.shape[0]), np.bincount(yi, minlength=n_c))]
        heap = []
        counter = 0

        def push(node_id):
            nonlocal counter
            split = self._best_split(X, yi, self.nodes_[node_id], n_c)
            if split is not None:
                gain, feat, thr = split
                heapq.heappush(heap, (-gain, counter, node_id, feat, thr))
                counter += 1

        push(0)
        splits = 0
        while heap and splits < self.max_splits:
            _, _, nid, feat, thr = heapq.heappop(heap)
            node = self.nodes_[nid]
            go_left = X[node.idx, feat] <= thr
            li, ri = node.idx[go_left], node.idx[~go_left]
            node.feature, node.threshold = feat, thr
            node.left = len(self.nodes_)
            self.nodes_.append(_Node(li, np.bincount(yi[li], minlength=n_c)))
            node.right = len(self.nodes_)
            self.nodes_.append(_Node(ri, np.bincount(yi[ri], minlength=n_c)))
            splits += 1
            push(node.left)
            push(node.right)
        self.n_splits_ = splits
        return self

    @staticmethod
    def _best_split(X, yi, node, n_c):
        n = node.idx.size
        if n < 2 or np.count_nonzero(node.counts) < 2:
            return None
        parent = n * _gini(node.counts)
        best = None
        for f in range(X.shape[1]):
            vals = X[node.idx, f]
            order = np.argsort(vals, kind="stable")
            v = vals[order]
            onehot = np.zeros((n, n_c))
            onehot[np.arange(n), yi[node.idx][order]] = 1.0
            left = np.cumsum(onehot, axis=0)[:-1]
            right = node.counts[None, :] - left
            nl = np.arange(1, n, dtype=float)
            nr = n - nl
            gl = nl - (left * left).sum(1) / nl
            gr = nr - (right * right).sum(1) / nr
            child = gl + gr
            valid = v[1:] > v[:-1]
            if not valid.any():
                continue
            child = np.where(valid, child, np.inf)
            k = int(np.argmin(child))
            gain = parent - child[k]
            if gain < -1e-12:
                continue
            gain = max(gain, 0.0)
            if best is None or gain > best[0] + 1e-12:
                best = (gain, f, 0.5 * (v[k] + v[k + 1]))
        return best

    def _leaf(self, x):
        node = self.nodes_[0]
        while node.left >= 0:
            node = self.nodes_[node.left] if x[node.feature] <= node.threshold else self.nodes_[node.right]
        return node

    def predict(self, X):
        X = _check_query(X, self.dim_)
        return np.array([self.classes_[int(np.argmax(self._leaf(x).counts))] for x in X])


def train(spec, X, y=None):
    """Fit the classifier described by ``spec``.

    ``X`` may be a FeatureMatrix, in which case its labels are used.
    """
    from ..garch import FeatureMatrix

    if isinstance(X, FeatureMatrix):
        X, y = X.X, X.labels
    if y is None:
        raise ConfigError("labels are required for training")
    if spec.kind == "knn":
        model = KNearestNeighbors(spec.k)
    elif spec.kind == "svm":
        model = SupportVectorMachine(spec.svm_kernel, spec.C, spec.svm_tol, spec.svm_max_iter)
    else:
        model = DecisionTree(spec.max_splits)
    return model.fit(X, y)


def predict(model, X):
    """Predicted labels for rows of ``X`` (a single vector gives one label)."""
    single = np.asarray(X).ndim == 1
    out = model.predict(X)
    return out[0] if single else out
