"""Kernel feature reduction: kernel PCA, kernel discriminant analysis, NCSE.

Reduction scenarios:

* ``SA`` identity (no reduction)
* ``SB`` kernel PCA
* ``SC`` kernel discriminant analysis
* ``SD`` kernel PCA followed by kernel discriminant analysis

Kernel scenarios first standardize features with training statistics;
``SA`` passes features through untouched.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import pdist

from .errors import ConfigError, DegenerateDataError, SingularSystemError
from .garch import FeatureMatrix

__all__ = [
    "Kernel",
    "Standardizer",
    "KpcaModel",
    "KdaModel",
    "ReductionModels",
    "center_gram",
    "ncse",
    "select_by_ncse",
    "fit_kpca",
    "transform_kpca",
    "fit_kda",
    "transform_kda",
    "reduce_pipeline",
    "MODES",
    "FORMAT_VERSION",
]

MODES = ("SA", "SB", "SC", "SD")
FORMAT_VERSION = 1
_EIG_REL_TOL = 1e-10


@dataclass(frozen=True)
class Kernel:
    """Kernel function spec.

    ``rbf``: ``exp(-gamma * |x - y|**2)``; ``gamma=None`` picks
    ``1 / (2 * median**2)`` of pairwise training distances at fit time.
    ``polynomial``: ``(gamma * x.y + coef0) ** degree``.
    ``sigmoid``: ``tanh(gamma * x.y + coef0)``.
    ``linear``: ``x.y``.
    For polynomial and sigmoid, ``gamma=None`` means ``1 / n_features``.
    """

    kind: str = "rbf"
    gamma: float | None = None
    degree: int = 3
    coef0: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rbf", "polynomial", "sigmoid", "linear"):
            raise ConfigError(f"unknown kernel {self.kind!r}")
        if self.gamma is not None and self.kind == "rbf" and not self.gamma > 0:
            raise ConfigError("rbf gamma must be positive")
        if self.kind == "polynomial" and int(self.degree) < 1:
            raise ConfigError("polynomial degree must be >= 1")

    def resolve(self, X):
        """Fix data-dependent parameters from the training matrix."""
        if self.gamma is not None or self.kind == "linear":
            return self
        X = np.atleast_2d(X)
        if self.kind == "rbf":
            dist = pdist(X) if X.shape[0] > 1 else np.zeros(0)
            med = float(np.median(dist)) if dist.size else 0.0
            if med <= 0:
                nz = dist[dist > 0]
                med = float(np.mean(nz)) if nz.size else 1.0
            return replace(self, gamma=1.0 / (2.0 * med * med))
        return replace(self, gamma=1.0 / X.shape[1])

    def __call__(self, A, B):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if self.kind == "linear":
            return A @ B.T
        gamma = self.gamma if self.gamma is not None else self.resolve(A).gamma
        if self.kind == "rbf":
            sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
            return np.exp(-gamma * np.maximum(sq, 0.0))
        dot = A @ B.T
        if self.kind == "polynomial":
            return (gamma * dot + self.coef0) ** int(self.degree)
        return np.tanh(gamma * dot + self.coef0)

    def to_dict(self):
        return {"kind": self.kind, "gamma": self.gamma, "degree": self.degree, "coef0": self.coef0}


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X):
        X = np.atleast_2d(X)
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean, scale)

    def transform(self, X):
        return (np.atleast_2d(X) - self.mean) / self.scale


def center_gram(K):
    """Double-centre a square Gram matrix (feature-space mean removal)."""
    K = np.asarray(K, dtype=float)
    col = K.mean(axis=0)
    row = K.mean(axis=1)
    return K - col[None, :] - row[:, None] + K.mean()


def _center_rows(k, col_means, grand):
    return k - k.mean(axis=1, keepdims=True) - col_means[None, :] + grand


def ncse(eigvals):
    """Normalized cumulative sum of descending eigenvalues; ends at exactly 1."""
    lam = np.asarray(eigvals, dtype=float)
    if lam.ndim != 1 or lam.size == 0:
        raise ConfigError("ncse needs a 1-D sequence of eigenvalues")
    if np.any(lam < 0):
        raise ConfigError("eigenvalues must be nonnegative")
    if np.any(np.diff(lam) > 0):
        raise ConfigError("eigenvalues must be sorted in descending order")
    total = lam.sum()
    if not total > 0:
        raise DegenerateDataError("all eigenvalues are zero")
    out = np.cumsum(lam) / total
    out = np.minimum(out, 1.0)
    out[-1] = 1.0
    return out


def select_by_ncse(eigvals, threshold=0.95):
    """Smallest count whose NCSE reaches ``threshold``."""
    if not 0 < threshold <= 1:
        raise ConfigError("NCSE threshold must lie in (0, 1]")
    shares = ncse(eigvals)
    return int(np.argmax(shares >= threshold)) + 1


def _fix_signs(vectors):
    # largest-magnitude entry of each column made positive
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


@dataclass
class KpcaModel:
    training_vectors: np.ndarray
    kernel: Kernel
    eigvals: np.ndarray
    coeff_vectors: np.ndarray
    col_means: np.ndarray
    grand_mean: float
    scores: np.ndarray
    all_eigvals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_p(self):
        return self.eigvals.size

    @property
    def dim(self):
        return self.training_vectors.shape[1]

    def transform(self, X):
        return transform_kpca(self, X)


def fit_kpca(X, kernel=None, ncse_threshold=0.95, n_components=None):
    """Fit kernel PCA on the rows of ``X``.

    Parameters
    ----------
    X : array_like or FeatureMatrix
        ``M x n_f`` training matrix, ``M >= 2``.
    kernel : Kernel, optional
        Defaults to RBF with the median-distance bandwidth.
    ncse_threshold : float
        Keep the fewest leading components whose NCSE reaches this value.
    n_components : int, optional
        Fixed component count; overrides the NCSE rule.

    Returns
    -------
    KpcaModel
        Coefficient vectors are scaled by ``1/sqrt(eigval)`` so each
        feature-space axis has unit norm; training scores then have
        per-component sum of squares equal to the eigenvalue.
    """
    X = _as_matrix(X)
    M = X.shape[0]
    if M < 2:
        raise ConfigError("kernel PCA needs at least 2 training rows")
    if not 0 < ncse_threshold <= 1:
        raise ConfigError("NCSE threshold must lie in (0, 1]")
    kernel = (kernel or Kernel()).resolve(X)
    K = kernel(X, X)
    R = center_gram(K)
    R = 0.5 * (R + R.T)
    lam, vec = np.linalg.eigh(R)
    order = np.argsort(lam)[::-1]
    lam, vec = lam[order], vec[:, order]
    scale_ref = max(abs(np.trace(K)) / M, np.finfo(float).tiny)
    if not lam[0] > 1e-10 * scale_ref:
        raise DegenerateDataError("centered Gram matrix is zero; rows carry no variance")
    keep = lam > _EIG_REL_TOL * lam[0]
    lam, vec = lam[keep], vec[:, keep]
    if n_components is not None:
        n_p = min(int(n_components), lam.size)
    else:
        n_p = select_by_ncse(lam, ncse_threshold)
    vec = _fix_signs(vec[:, :n_p])
    coeff = vec / np.sqrt(lam[:n_p])
    scores = R @ coeff
    return KpcaModel(
        training_vectors=X.copy(),
        kernel=kernel,
        eigvals=lam[:n_p].copy(),
        coeff_vectors=coeff,
        col_means=K.mean(axis=0),
        grand_mean=float(K.mean()),
        scores=scores,
        all_eigvals=lam.copy(),
    )


def transform_kpca(model, X):
    """Project rows of ``X`` onto the fitted kernel principal axes."""
    X = _as_matrix(X)
    if X.shape[1] != model.dim:
        raise ConfigError(f"expected {model.dim} features, got {X.shape[1]}")
    k = model.kernel(X, model.training_vectors)
    return _center_rows(k, model.col_means, model.grand_mean) @ model.coeff_vectors


@dataclass
class KdaModel:
    training_vectors: np.ndarray
    kernel: Kernel
    alphas: np.ndarray
    class_labels: tuple
    ridge: float
    eigvals: np.ndarray
    col_means: np.ndarray
    grand_mean: float
    embedding: np.ndarray

    @property
    def dim(self):
        return self.training_vectors.shape[1]

    @property
    def n_out(self):
        return self.alphas.shape[1]

    def transform(self, X):
        return transform_kda(self, X)


def fit_kda(X, labels, kernel=None, ridge=None):
    """Fit kernel discriminant analysis.

    Solves ``(K W K) alpha = lambda (K K + ridge K) alpha`` on the centred
    kernel matrix ``K``, where ``W`` averages within each class, and keeps
    at most ``n_c - 1`` directions with nonzero eigenvalue.

    The problem is solved on the range of ``K``, where the right-hand
    matrix is positive definite.
    """
    X = _as_matrix(X)
    labels = np.asarray(labels).astype(str)
    if labels.shape[0] != X.shape[0]:
        raise ConfigError("labels and rows disagree in length")
    classes = sorted(set(labels.tolist()))
    if len(classes) < 2:
        raise ConfigError("kernel discriminant analysis needs at least 2 classes")
    M = X.shape[0]
    kernel = (kernel or Kernel()).resolve(X)
    K_raw = kernel(X, X)
    K = center_gram(K_raw)
    K = 0.5 * (K + K.T)
    if ridge is None:
        ridge = 1e-8 * max(np.trace(K), 0.0) / M
    if ridge < 0:
        raise ConfigError("ridge must be nonnegative")

    W = np.zeros((M, M))
    for c in classes:
        idx = np.flatnonzero(labels == c)
        W[np.ix_(idx, idx)] = 1.0 / idx.size

    s, U = np.linalg.eigh(K)
    if s.size == 0 or not s[-1] > 0:
        raise SingularSystemError("centred kernel matrix has no positive eigenvalue")
    keep = s > _EIG_REL_TOL * s[-1]
    s, U = s[keep], U[:, keep]
    A = (s[:, None] * (U.T @ W @ U)) * s[None, :]
    Bdiag = s * s + ridge * s
    if not np.all(Bdiag > 0):
        raise SingularSystemError("regularized kernel system is singular")
    inv_sqrt = 1.0 / np.sqrt(Bdiag)
    C = (inv_sqrt[:, None] * A) * inv_sqrt[None, :]
    C = 0.5 * (C + C.T)
    lam, V = np.linalg.eigh(C)
    order = np.argsort(lam)[::-1]
    lam, V = lam[order], V[:, order]
    n_keep = min(len(classes) - 1, int(np.sum(lam > _EIG_REL_TOL)))
    if n_keep < 1:
        raise SingularSystemError("no discriminant direction with nonzero eigenvalue")
    lam, V = lam[:n_keep], V[:, :n_keep]
    alphas = U @ (inv_sqrt[:, None] * V)
    emb = K @ alphas
    # orient each axis so the first class sits on the negative side
    first = labels == classes[0]
    signs = -np.sign(emb[first].mean(axis=0))
    fallback = np.sign(alphas[np.argmax(np.abs(alphas), axis=0), np.arange(n_keep)])
    signs = np.where(signs == 0, fallback, signs)
    alphas = alphas * signs
    emb = emb * signs
    return KdaModel(
        training_vectors=X.copy(),
        kernel=kernel,
        alphas=alphas,
        class_labels=tuple(classes),
        ridge=float(ridge),
        eigvals=lam,
        col_means=K_raw.mean(axis=0),
        grand_mean=float(K_raw.mean()),
        embedding=emb,
    )


def transform_kda(model, X):
    """Embed rows of ``X`` in the discriminant subspace."""
    X = _as_matrix(X)
    if X.shape[1] != model.dim:
        raise ConfigError(f"expected {model.dim} features, got {X.shape[1]}")
    k = model.kernel(X, model.training_vectors)
    return _center_rows(k, model.col_means, model.grand_mean) @ model.alphas


def _as_matrix(X):
    if isinstance(X, FeatureMatrix):
        X = X.X
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ConfigError("expected a 2-D feature matrix")
    if not np.all(np.isfinite(X)):
        raise ConfigError("feature matrix contains non-finite values")
    return X


@dataclass
class ReductionModels:
    """Fitted chain for one scenario: standardizer, then optional KPCA/KDA."""

    mode: str
    standardizer: Standardizer
    kpca: KpcaModel | None = None
    kda: KdaModel | None = None

    def transform(self, X):
        if self.mode == "SA":
            return _as_matrix(X).copy()
        Z = self.standardizer.transform(_as_matrix(X))
        if self.kpca is not None:
            Z = transform_kpca(self.kpca, Z)
        if self.kda is not None:
            Z = transform_kda(self.kda, Z)
        return Z

    @property
    def n_features(self):
        if self.kda is not None:
            return self.kda.n_out
        if self.kpca is not None:
            return self.kpca.n_p
        return self.standardizer.mean.size

    def to_dict(self):
        def arr(a):
            return np.asarray(a).tolist()

        d = {
            "format": "vmdgarch.reduction",
            "version": FORMAT_VERSION,
            "mode": self.mode,
            "standardizer": {"mean": arr(self.standardizer.mean), "scale": arr(self.standardizer.scale)},
            "kpca": None,
            "kda": None,
        }
        if self.kpca is not None:
            m = self.kpca
            d["kpca"] = {
                "training_vectors": arr(m.training_vectors),
                "kernel": m.kernel.to_dict(),
                "eigvals": arr(m.eigvals),
                "coeff_vectors": arr(m.coeff_vectors),
                "col_means": arr(m.col_means),
                "grand_mean": m.grand_mean,
                "scores": arr(m.scores),
            }
        if self.kda is not None:
            m = self.kda
            d["kda"] = {
                "training_vectors": arr(m.training_vectors),
                "kernel": m.kernel.to_dict(),
                "alphas": arr(m.alphas),
                "class_labels": list(m.class_labels),
                "ridge": m.ridge,
                "eigvals": arr(m.eigvals),
                "col_means": arr(m.col_means),
                "grand_mean": m.grand_mean,
                "embedding": arr(m.embedding),
            }
        return d

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != "vmdgarch.reduction" or d.get("version") != FORMAT_VERSION:
            raise ConfigError("unsupported reduction model container")
        st = Standardizer(np.array(d["standardizer"]["mean"]), np.array(d["standardizer"]["scale"]))
        kpca = kda = None
        if d["kpca"] is not None:
            k = d["kpca"]
            kpca = KpcaModel(
                np.array(k["training_vectors"]),
                Kernel(**k["kernel"]),
                np.array(k["eigvals"]),
                np.array(k["coeff_vectors"]),
                np.array(k["col_means"]),
                float(k["grand_mean"]),
                np.array(k["scores"]),
            )
        if d["kda"] is not None:
            k = d["kda"]
            kda = KdaModel(
                np.array(k["training_vectors"]),
                Kernel(**k["kernel"]),
                np.array(k["alphas"]),
                tuple(k["class_labels"]),
                float(k["ridge"]),
                np.array(k["eigvals"]),
                np.array(k["col_means"]),
                float(k["grand_mean"]),
                np.array(k["embedding"]),
            )
        return cls(d["mode"], st, kpca, kda)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def reduce_pipeline(X, mode="SD", kernel=None, ncse_threshold=0.95, ridge=None):
    """Fit one reduction scenario and return ``(models, reduced)``.

    Parameters
    ----------
    X : FeatureMatrix
        Labels are required for ``SC`` and ``SD``.
    mode : {"SA", "SB", "SC", "SD"}
    kernel : Kernel, optional
        Used for every kernel stage; data-dependent parameters are resolved
        separately on each stage's own input.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown reduction mode {mode!r}; expected one of {MODES}")
    if not isinstance(X, FeatureMatrix):
        raise ConfigError("reduce_pipeline expects a FeatureMatrix")
    kernel = kernel or Kernel()
    st = Standardizer.fit(X.X)
    Z = st.transform(X.X)
    kpca = kda = None
    if mode in ("SB", "SD"):
        kpca = fit_kpca(Z, kernel, ncse_threshold)
        Z = kpca.scores
    if mode in ("SC", "SD"):
        kda = fit_kda(Z, X.labels, kernel, ridge)
        Z = kda.embedding
    models = ReductionModels(mode, st, kpca, kda)
    if mode == "SA":
        return models, X.with_values(X.X.copy(), list(X.column_map))
    prefix = {"SB": "kpca", "SC": "kda", "SD": "kda"}[mode]
    cmap = [("", j + 1, f"{prefix}{j + 1}") for j in range(Z.shape[1])]
    return models, X.with_values(Z, cmap)
