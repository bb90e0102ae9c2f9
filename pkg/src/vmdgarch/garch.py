"""Constant-mean GARCH(r, m) estimation, feature assembly and GARCH-effect tests.

The conditional variance follows::

    sigma2[t] = beta + sum_i b[i] * sigma2[t-i] + sum_j a[j] * eps[t-j]**2

with ``eps = s - c`` and ``c`` the sample mean. Parameters are estimated by
Gaussian quasi maximum likelihood under ``beta > 0``, ``b, a >= 0`` and
``sum(b) + sum(a) < 1``. The constraints hold by construction through a
reparameterization, so every returned model is admissible, converged or not.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, signal, special, stats

from .errors import ConfigError, DatasetError, DegenerateSignalError, SingularSystemError, VmdGarchError

__all__ = [
    "GarchOrder",
    "GarchModel",
    "FeatureMatrix",
    "fit_garch",
    "garch_variance",
    "garch_loglik",
    "simulate_garch",
    "extract_features",
    "feature_column_map",
    "feature_count",
    "kurtosis",
    "ArchTestResult",
    "arch_lm_test",
    "GarchEffectReport",
    "garch_effect_report",
]

_LOG_2PI = math.log(2.0 * math.pi)
_BUDGET = 1.0 - 1e-6


@dataclass(frozen=True)
class GarchOrder:
    """``r`` lagged variances and ``m`` lagged squared residuals."""

    r: int = 1
    m: int = 1

    def __post_init__(self):
        if self.r < 0 or self.m < 1:
            raise ConfigError(f"invalid GARCH order r={self.r}, m={self.m}")

    @property
    def n_coef(self):
        return self.r + self.m

    def coef_names(self):
        return [f"b{i + 1}" for i in range(self.r)] + [f"a{j + 1}" for j in range(self.m)]


@dataclass(frozen=True)
class GarchModel:
    beta: float
    b: np.ndarray
    a: np.ndarray
    c: float
    loglik: float
    sigma2: np.ndarray
    converged: bool
    init_loglik: float = math.nan
    n_evals: int = 0

    @property
    def order(self):
        return GarchOrder(len(self.b), len(self.a))

    @property
    def persistence(self):
        return float(np.sum(self.b) + np.sum(self.a))

    def coefficients(self):
        """Feature coefficients ``[b1..br, a1..am]``."""
        return np.concatenate([self.b, self.a])

    def satisfies_constraints(self):
        return bool(
            self.beta > 0
            and np.all(self.b >= 0)
            and np.all(self.a >= 0)
            and self.persistence < 1
            and np.all(self.sigma2 > 0)
        )


def garch_variance(eps, beta, b, a, sigma0_sq=None):
    """Conditional variance series for residuals ``eps``.

    Presample variances and squared residuals are set to ``sigma0_sq``
    (default: the sample variance of ``eps``).
    """
    eps = np.asarray(eps, dtype=float)
    b = np.atleast_1d(np.asarray(b, dtype=float))
    a = np.atleast_1d(np.asarray(a, dtype=float))
    e2 = eps**2
    if sigma0_sq is None:
        sigma0_sq = float(np.mean(e2))
    return _variance(e2, beta, b, a, sigma0_sq)


def _variance(e2, beta, b, a, s0):
    n = e2.size
    drive = np.full(n, float(beta))
    for i in range(a.size):
        # lag i + 1, presample values equal to s0
        drive[: i + 1] += a[i] * s0
        drive[i + 1 :] += a[i] * e2[: n - i - 1]
    if b.size == 0:
        return drive
    # filter state equivalent to a presample variance history of s0
    zi = s0 * np.cumsum(b[::-1])[::-1]
    out, _ = signal.lfilter([1.0], np.concatenate([[1.0], -b]), drive, zi=zi)
    return out


def garch_loglik(eps, sigma2):
    eps = np.asarray(eps, dtype=float)
    return float(-0.5 * np.sum(_LOG_2PI + np.log(sigma2) + eps**2 / sigma2))


def _unpack(theta, order, scale):
    # clipped so wild line-search trials give a finite, merely poor, point
    beta = scale * math.exp(min(max(theta[0], -700.0), 700.0))
    k = order.n_coef
    total = _BUDGET * float(special.expit(theta[1]))
    logits = np.concatenate([theta[2:], [0.0]])
    w = np.exp(logits - logits.max())
    coef = total * w / w.sum()
    return beta, coef[: order.r], coef[order.r : k]


def _pack(beta, b, a, scale):
    coef = np.concatenate([b, a])
    total = coef.sum()
    logits = np.log(coef) - math.log(coef[-1])
    return np.concatenate([[math.log(beta / scale), math.log(total / (_BUDGET - total))], logits[:-1]])


def _initial_params(order, var):
    if order.r > 0:
        b = np.full(order.r, 0.85 / order.r)
        a = np.full(order.m, 0.05 / order.m)
    else:
        b = np.zeros(0)
        a = np.full(order.m, 0.3 / order.m)
    beta = (1.0 - b.sum() - a.sum()) * var
    return beta, b, a


def _negll_and_grad(theta, eps, e2, order, var):
    """Per-sample negative log-likelihood and its gradient in ``theta``.

    The sensitivities of the variance series obey the same recursion as the
    variance itself. Their weighted sum is taken through the adjoint filter,
    one backward pass over the weights instead of one pass per parameter.
    """
    n = eps.size
    r, m = order.r, order.m
    beta, b, a = _unpack(theta, order, var)
    s2 = _variance(e2, beta, b, a, var)
    if not np.all(s2 > 0) or not np.all(np.isfinite(s2)):
        return np.inf, np.zeros_like(theta)
    f = 0.5 * float(np.mean(_LOG_2PI + np.log(s2) + e2 / s2))

    # direct partials of sigma2_t wrt (beta, b_1..b_r, a_1..a_m)
    D = np.empty((1 + r + m, n))
    D[0] = 1.0
    s2_pad = np.concatenate([np.full(r, var), s2])
    e2_pad = np.concatenate([np.full(m, var), e2])
    for j in range(r):
        D[1 + j] = s2_pad[r - 1 - j : r - 1 - j + n]
    for i in range(m):
        D[1 + r + i] = e2_pad[m - 1 - i : m - 1 - i + n]
    w = (1.0 - e2 / s2) / (s2 * (2.0 * n))
    if r:
        w = signal.lfilter([1.0], np.concatenate([[1.0], -b]), w[::-1])[::-1]
    g_nat = D @ w

    coef = np.concatenate([b, a])
    total = coef.sum()
    soft = coef / total if total > 0 else np.full(coef.size, 1.0 / coef.size)
    g_coef = g_nat[1:]
    grad = np.empty_like(theta)
    grad[0] = g_nat[0] * beta
    grad[1] = float(g_coef @ coef) * (1.0 - total / _BUDGET)
    k = coef.size
    for j in range(k - 1):
        grad[2 + j] = total * soft[j] * (g_coef[j] - float(g_coef @ soft))
    return f, grad


def fit_garch(series, order=None, max_evals=2000, tol=1e-10):
    """Gaussian quasi-MLE of a constant-mean GARCH model.

    Parameters
    ----------
    series : array_like
    order : GarchOrder, optional
        Defaults to GARCH(1, 1).
    max_evals : int
        Cap on likelihood evaluations across the run and its restart.
    tol : float
        Relative tolerance on the per-sample negative log-likelihood.

    Returns
    -------
    GarchModel
        ``converged`` is False if the optimizer hit its budget; the best
        admissible point found is returned either way.
    """
    order = order or GarchOrder()
    s = np.asarray(series, dtype=float)
    if s.ndim != 1 or not np.all(np.isfinite(s)):
        raise ConfigError("series must be a finite 1-D sequence")
    if s.size < 10 * order.n_coef:
        raise ConfigError(
            f"series of length {s.size} too short for GARCH({order.r},{order.m}); "
            f"need >= {10 * order.n_coef}"
        )
    c = float(np.mean(s))
    eps = s - c
    var = float(np.mean(eps**2))
    if not var > 1e-300 or np.ptp(s) == 0:
        raise DegenerateSignalError("constant series has no variance to model")
    n = s.size
    e2 = eps**2

    beta0, b0, a0 = _initial_params(order, var)
    theta0 = _pack(beta0, b0, a0, var)
    init_nll, _ = _negll_and_grad(theta0, eps, e2, order, var)

    def run(start, budget):
        return optimize.minimize(
            _negll_and_grad,
            start,
            args=(eps, e2, order, var),
            jac=True,
            method="L-BFGS-B",
            options={"maxfun": budget, "maxiter": budget, "ftol": tol, "gtol": 1e-9},
        )

    res = run(theta0, max_evals)
    evals = res.nfev
    best, best_f, ok = res.x, res.fun, res.success
    remaining = max_evals - evals
    if remaining > 20:
        # a restart discards the curvature memory, which helps when the first
        # run stopped on a flat stretch
        res2 = run(best, remaining)
        evals += res2.nfev
        if res2.fun <= best_f:
            best, best_f = res2.x, res2.fun
        ok = ok and res2.success
    else:
        ok = False
    if not best_f <= init_nll:
        best, best_f, ok = theta0, init_nll, False

    beta, b, a = _unpack(best, order, var)
    s2 = garch_variance(eps, beta, b, a, var)
    model = GarchModel(
        beta=beta,
        b=b,
        a=a,
        c=c,
        loglik=garch_loglik(eps, s2),
        sigma2=s2,
        converged=bool(ok),
        init_loglik=-init_nll * n,
        n_evals=int(evals),
    )
    if not model.satisfies_constraints():
        raise VmdGarchError("fitted GARCH parameters violate positivity/stationarity")
    return model


def simulate_garch(beta, b, a, n, seed=None, burn=500, mean=0.0):
    """Draw ``n`` samples of a Gaussian GARCH process."""
    b = np.atleast_1d(np.asarray(b, dtype=float))
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if b.sum() + a.sum() >= 1:
        raise ConfigError("simulation requires a stationary parameter set")
    rng = np.random.default_rng(seed)
    r, m = b.size, a.size
    total = n + burn
    z = rng.standard_normal(total)
    uncond = beta / (1.0 - b.sum() - a.sum())
    s2 = np.full(total + max(r, m), uncond)
    e = np.zeros(total + max(r, m))
    p = max(r, m)
    e[:p] = math.sqrt(uncond)
    for t in range(p, total + p):
        v = beta
        for i in range(r):
            v += b[i] * s2[t - 1 - i]
        for j in range(m):
            v += a[j] * e[t - 1 - j] ** 2
        s2[t] = v
        e[t] = math.sqrt(v) * z[t - p]
    return mean + e[p + burn :]


def feature_count(imf_counts, order=None):
    order = order or GarchOrder()
    return int(sum(imf_counts) * order.n_coef)


def feature_column_map(imf_counts, order=None):
    """``(sensor, imf, coefficient)`` per column, sensors outer, IMFs middle."""
    order = order or GarchOrder()
    names = order.coef_names()
    return [
        (sensor + 1, k + 1, name)
        for sensor, d in enumerate(imf_counts)
        for k in range(d)
        for name in names
    ]


def extract_features(imfs_per_sensor, order=None, **fit_kwargs):
    """Stacked GARCH coefficients of every IMF of one record.

    Parameters
    ----------
    imfs_per_sensor : sequence of ImfSet
        Sensors in manifest order; modes within each already sorted by
        centre frequency.
    order : GarchOrder, optional

    Returns
    -------
    ndarray
        Length ``sum(d_i) * (r + m)``.
    """
    order = order or GarchOrder()
    out = []
    for si, imfs in enumerate(imfs_per_sensor):
        for k, mode in enumerate(imfs.modes):
            try:
                model = fit_garch(mode, order, **fit_kwargs)
            except VmdGarchError as exc:
                raise type(exc)(f"sensor {si + 1}, imf {k + 1}: {exc}") from exc
            out.append(model.coefficients())
    if not out:
        return np.zeros(0)
    return np.concatenate(out)


@dataclass
class FeatureMatrix:
    """Feature rows, one per record, with labels and column provenance."""

    X: np.ndarray
    labels: np.ndarray
    ids: tuple = ()
    column_map: list = field(default_factory=list)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.labels = np.asarray(self.labels).astype(str)
        if self.labels.shape[0] != self.X.shape[0]:
            raise ConfigError("labels and rows disagree in length")
        if not self.ids:
            self.ids = tuple(f"r{i}" for i in range(self.X.shape[0]))
        self.ids = tuple(self.ids)
        if not self.column_map:
            self.column_map = [("", j + 1, f"f{j + 1}") for j in range(self.X.shape[1])]

    @property
    def n_rows(self):
        return self.X.shape[0]

    @property
    def n_f(self):
        return self.X.shape[1]

    @property
    def classes(self):
        return sorted(set(self.labels.tolist()))

    def subset(self, idx):
        idx = np.asarray(idx)
        return FeatureMatrix(
            self.X[idx], self.labels[idx], tuple(self.ids[i] for i in idx), list(self.column_map)
        )

    def with_values(self, X, column_map=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if column_map is None:
            column_map = [("", j + 1, f"c{j + 1}") for j in range(X.shape[1])]
        return FeatureMatrix(X, self.labels.copy(), self.ids, column_map)

    def column_names(self):
        names = []
        for sensor, imf, coef in self.column_map:
            names.append(f"s{sensor}_imf{imf}_{coef}" if sensor != "" else str(coef))
        return names

    def to_csv(self, path):
        from .signalio import format_float

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", *self.column_names(), "label"])
            for rid, row, lab in zip(self.ids, self.X, self.labels):
                w.writerow([rid, *(format_float(v) for v in row), lab])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0][0] != "id" or rows[0][-1] != "label":
            raise DatasetError(f"{path} is not a feature matrix CSV")
        header = rows[0][1:-1]
        cmap = []
        for name in header:
            parts = name.split("_")
            if len(parts) == 3 and parts[0].startswith("s") and parts[1].startswith("imf"):
                cmap.append((int(parts[0][1:]), int(parts[1][3:]), parts[2]))
            else:
                cmap.append(("", len(cmap) + 1, name))
        body = rows[1:]
        X = np.array([[float(v) for v in r[1:-1]] for r in body], dtype=float).reshape(len(body), len(header))
        return cls(X, [r[-1] for r in body], tuple(r[0] for r in body), cmap)


def kurtosis(series):
    """Fourth standardized moment with population (biased) moments."""
    s = np.asarray(series, dtype=float)
    if s.size < 4:
        raise ConfigError("kurtosis needs at least 4 samples")
    dev = s - s.mean()
    m2 = np.mean(dev**2)
    if not m2 > 0:
        raise DegenerateSignalError("kurtosis undefined for zero variance")
    return float(np.mean(dev**4) / m2**2)


@dataclass(frozen=True)
class ArchTestResult:
    h: bool
    p_value: float
    stat: float
    critical: float


def arch_lm_test(series, q=1, significance=0.05):
    """Engle's Lagrange multiplier test for ARCH effects.

    Regresses squared demeaned residuals on an intercept and ``q`` of their
    own lags; the statistic ``T * R**2`` is chi-square with ``q`` degrees of
    freedom under the null of no ARCH effect. ``T`` is the number of
    regression rows, ``len(series) - q``.
    """
    s = np.asarray(series, dtype=float)
    q = int(q)
    if q < 1:
        raise ConfigError("ARCH test needs q >= 1")
    if s.size <= q + 10:
        raise ConfigError(f"series of length {s.size} too short for q={q}")
    if not 0 < significance < 1:
        raise ConfigError("significance must lie in (0, 1)")
    e2 = (s - s.mean()) ** 2
    y = e2[q:]
    T = y.size
    lags = np.column_stack([e2[q - j : s.size - j] for j in range(1, q + 1)])
    Z = np.column_stack([np.ones(T), lags])
    yc = y - y.mean()
    sst = float(yc @ yc)
    if not sst > 1e-300 * max(1.0, float(y @ y)):
        raise SingularSystemError("squared residuals are constant; ARCH regression is singular")
    coef, _, rank, _ = np.linalg.lstsq(Z, y, rcond=None)
    if rank < Z.shape[1]:
        raise SingularSystemError("ARCH regression design is rank deficient")
    resid = y - Z @ coef
    r2 = 1.0 - float(resid @ resid) / sst
    stat = T * r2
    critical = float(stats.chi2.ppf(1.0 - significance, q))
    p_value = float(stats.chi2.sf(stat, q))
    return ArchTestResult(h=bool(stat > critical), p_value=p_value, stat=float(stat), critical=critical)


@dataclass
class GarchEffectReport:
    """Per (sensor, imf) averages over records of ARCH tests plus kurtosis range."""

    rows: list

    def table7(self):
        """Kurtosis min/max rows: sensor, statistic, one value per IMF."""
        return self._pivot([("Min", "kurt_min"), ("Max", "kurt_max")])

    def table8(self):
        """ARCH test rows: sensor, result name, one value per IMF."""
        return self._pivot(
            [("h", "mean_h"), ("pValue", "mean_p"), ("GARCHstat", "mean_stat"), ("CriticalValue", "critical")]
        )

    def _pivot(self, fields):
        sensors = sorted({r["sensor"] for r in self.rows})
        width = max(r["imf"] for r in self.rows)
        out = []
        for s in sensors:
            cells = {r["imf"]: r for r in self.rows if r["sensor"] == s}
            for name, key in fields:
                out.append([s, name] + [cells[k][key] if k in cells else None for k in range(1, width + 1)])
        return ["sensor", "statistic"] + [str(k) for k in range(1, width + 1)], out

    def write_csv(self, path, which):
        from .signalio import format_float

        header, body = self.table7() if which == 7 else self.table8()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in body:
                w.writerow(row[:2] + ["" if v is None else format_float(v) for v in row[2:]])


def garch_effect_report(records_imfs, q=1, significance=0.05):
    """Average ARCH test results and kurtosis extremes per (sensor, IMF).

    Parameters
    ----------
    records_imfs : sequence of sequence of ImfSet
        For each record, the ImfSets of its sensors. A single record's list
        of ImfSets is accepted too.
    """
    from .vmd import ImfSet

    records_imfs = list(records_imfs)
    if records_imfs and isinstance(records_imfs[0], ImfSet):
        records_imfs = [records_imfs]
    if not records_imfs:
        raise ConfigError("no records to diagnose")
    acc = {}
    for rec in records_imfs:
        for si, imfs in enumerate(rec):
            for k, mode in enumerate(imfs.modes):
                res = arch_lm_test(mode, q, significance)
                cell = acc.setdefault((si + 1, k + 1), {"h": [], "p": [], "stat": [], "crit": res.critical, "kurt": []})
                cell["h"].append(float(res.h))
                cell["p"].append(res.p_value)
                cell["stat"].append(res.stat)
                cell["kurt"].append(kurtosis(mode))
    rows = []
    for (s, k), cell in sorted(acc.items()):
        rows.append(
            {
                "sensor": s,
                "imf": k,
                "n": len(cell["h"]),
                "mean_h": float(np.mean(cell["h"])),
                "mean_p": float(np.mean(cell["p"])),
                "mean_stat": float(np.mean(cell["stat"])),
                "critical": cell["crit"],
                "kurt_min": float(np.min(cell["kurt"])),
                "kurt_max": float(np.max(cell["kurt"])),
            }
        )
    return GarchEffectReport(rows)
