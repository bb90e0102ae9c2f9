"""Variational mode decomposition (VMD) of a single real channel.

The decomposition runs ADMM in the frequency domain on the nonnegative half
of the spectrum of a (by default mirror-extended) copy of the signal. Every mode update is
a Wiener filter centred on the current mode frequency, and every centre
frequency is the power centroid of its mode.

Frequencies inside the solver are normalised (cycles per sample of the
mirrored signal), so ``alpha`` has the same meaning regardless of sample rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError

__all__ = [
    "VmdConfig",
    "ImfSet",
    "decompose",
    "mean_abs_residual",
    "residual_curve",
    "knee_index",
    "select_imf_count",
    "NONLINEAR_IMF_COUNTS",
    "LINEAR_IMF_COUNTS",
]

# IMF counts per sensor chosen for the two reference rigs (bookshelf frame
# with bumper: 4 sensors; linear frame: 3 sensors).
NONLINEAR_IMF_COUNTS = (10, 7, 7, 7)
LINEAR_IMF_COUNTS = (8, 8, 8)


@dataclass(frozen=True)
class VmdConfig:
    """Solver settings.

    Attributes
    ----------
    d : int
        Number of modes.
    alpha : float
        Bandwidth penalty.
    tau : float
        Dual ascent step; 0 disables the Lagrange multiplier update.
    tol : float
        Stop once the summed relative mode change falls below this.
    max_iter : int
        Iteration cap.
    init : str or tuple of float
        ``"uniform"`` spaces initial centres over [0, rate/2), ``"zero"``
        starts them all at DC; a tuple gives explicit centres in Hz.
    boundary : str
        ``"mirror"`` extends the signal by half its length on each side
        before the FFT; ``"periodic"`` uses it as is (exact for signals
        holding an integer number of periods).
    """

    d: int = 3
    alpha: float = 2000.0
    tau: float = 0.0
    tol: float = 1e-7
    max_iter: int = 500
    init: object = "uniform"
    boundary: str = "mirror"

    def __post_init__(self):
        if int(self.d) < 1:
            raise ConfigError("VMD needs d >= 1")
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if self.tau < 0:
            raise ConfigError("tau must be nonnegative")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if int(self.max_iter) < 1:
            raise ConfigError("max_iter must be >= 1")
        if isinstance(self.init, str):
            if self.init not in ("uniform", "zero"):
                raise ConfigError(f"unknown init policy {self.init!r}")
        elif len(tuple(self.init)) != self.d:
            raise ConfigError("explicit init needs one centre frequency per mode")
        if self.boundary not in ("mirror", "periodic"):
            raise ConfigError(f"unknown boundary policy {self.boundary!r}")

    def with_d(self, d):
        init = self.init if isinstance(self.init, str) else "uniform"
        return replace(self, d=int(d), init=init)


@dataclass(frozen=True)
class ImfSet:
    """Modes of one channel, sorted by ascending centre frequency."""

    modes: np.ndarray
    center_freqs_hz: np.ndarray
    residual: np.ndarray
    iterations: int
    converged: bool
    rate_hz: float = 1.0
    final_change: float = field(default=0.0)

    @property
    def d(self):
        return self.modes.shape[0]

    @property
    def length(self):
        return self.modes.shape[1]

    def summary(self):
        return {
            "d": self.d,
            "center_freqs_hz": [float(w) for w in self.center_freqs_hz],
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "residual_l2": float(np.linalg.norm(self.residual)),
            "mean_abs_residual": float(np.mean(np.abs(self.residual))),
        }


def _initial_centres(cfg, rate_hz):
    d = cfg.d
    if cfg.init == "uniform":
        return 0.5 * np.arange(d) / d
    if cfg.init == "zero":
        return np.zeros(d)
    return np.asarray(cfg.init, dtype=float) / rate_hz


def decompose(signal, rate_hz, cfg=None):
    """Split ``signal`` into ``cfg.d`` band-limited modes.

    Parameters
    ----------
    signal : array_like
        Real samples.
    rate_hz : float
        Sample rate, used only to express centre frequencies in Hz.
    cfg : VmdConfig, optional

    Returns
    -------
    ImfSet
        ``residual`` is exactly ``signal - modes.sum(axis=0)``.
    """
    cfg = cfg or VmdConfig()
    f = np.asarray(signal, dtype=float)
    if f.ndim != 1:
        raise ConfigError("decompose expects a 1-D signal")
    if not np.all(np.isfinite(f)):
        raise ConfigError("signal contains non-finite samples")
    if not rate_hz > 0:
        raise ConfigError("rate_hz must be positive")
    n = f.size
    d = int(cfg.d)
    if n < 2 * d:
        raise ConfigError(f"signal of length {n} is too short for {d} modes (need >= {2 * d})")

    if cfg.boundary == "mirror":
        half = n // 2
        mirrored = np.concatenate([f[:half][::-1], f, f[n - half:][::-1]])
    else:
        half = 0
        mirrored = f
    T = mirrored.size
    F = np.fft.rfft(mirrored)
    freqs = np.arange(F.size) / T

    omega = _initial_centres(cfg, rate_hz)
    U = np.zeros((d, F.size), dtype=complex)
    lam = np.zeros(F.size, dtype=complex)
    two_alpha = 2.0 * cfg.alpha
    total = np.zeros(F.size, dtype=complex)
    # squared norm of every mode as of the start of the current sweep
    norms = np.zeros(d)
    dn = np.zeros(d)
    converged = False
    change = np.inf
    it = 0
    while it < cfg.max_iter:
        it += 1
        target = F + 0.5 * lam if cfg.tau > 0 else F
        prev_norms = norms.copy()
        for k in range(d):
            old = U[k]
            new = (target - total + old) / (1.0 + two_alpha * (freqs - omega[k]) ** 2)
            delta = new - old
            total += delta
            U[k] = new
            dn[k] = delta.real @ delta.real + delta.imag @ delta.imag
            power = new.real * new.real + new.imag * new.imag
            p = power.sum()
            norms[k] = p
            if p > 0:
                omega[k] = (freqs @ power) / p
        if cfg.tau > 0:
            lam = lam + cfg.tau * (F - total)
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(dn == 0, 0.0, dn / prev_norms)
        change = float(np.sum(rel))
        if change < cfg.tol:
            converged = True
            break

    modes_full = np.fft.irfft(U, n=T, axis=1)
    modes = modes_full[:, half:half + n]
    order = np.argsort(omega, kind="stable")
    modes = np.ascontiguousarray(modes[order])
    centres = omega[order] * rate_hz
    residual = f - modes.sum(axis=0)
    return ImfSet(
        modes=modes,
        center_freqs_hz=centres,
        residual=residual,
        iterations=it,
        converged=converged,
        rate_hz=float(rate_hz),
        final_change=change,
    )


def mean_abs_residual(signal, rate_hz, cfg=None):
    """Mean absolute value of the VMD residual."""
    return float(np.mean(np.abs(decompose(signal, rate_hz, cfg).residual)))


def residual_curve(signal, rate_hz, cfg_base, d_values):
    """Mean absolute residual for each mode count in ``d_values``."""
    return np.array([mean_abs_residual(signal, rate_hz, cfg_base.with_d(d)) for d in d_values])


def knee_index(curve, rel_drop):
    """Index of the first point whose relative drop to the next is below ``rel_drop``.

    Returns the last index when no such point exists.
    """
    curve = np.asarray(curve, dtype=float)
    if curve.size == 0:
        raise ConfigError("empty residual curve")
    if not 0 < rel_drop < 1:
        raise ConfigError("rel_drop must lie in (0, 1)")
    for i in range(curve.size - 1):
        if curve[i] <= 0:
            return i
        if (curve[i] - curve[i + 1]) / curve[i] < rel_drop:
            return i
    return curve.size - 1


def select_imf_count(signal, rate_hz, cfg_base, d_range, rel_drop=0.05):
    """Smallest mode count past which more modes stop reducing the residual.

    ``d_range`` is any iterable of increasing integers (e.g. ``range(2, 12)``).
    """
    d_values = [int(d) for d in d_range]
    if not d_values:
        raise ConfigError("d_range is empty")
    curve = residual_curve(signal, rate_hz, cfg_base, d_values)
    return d_values[knee_index(curve, rel_drop)]
