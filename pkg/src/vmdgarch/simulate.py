"""Synthetic three-storey shear frame used as a labelled stand-in for test rigs.

Equation of motion in storey displacements relative to the base::

    M x'' + C x' + K x + f_bumper(x) = -M 1 a_g(t)

The base is driven by a shaker force; the resulting base acceleration
``a_g`` is that force divided by the base mass (plus any mass added at the
base). Channels of the returned record are absolute storey accelerations
``x'' + a_g``.

The bumper is a one-sided linear spring on storey 2: it engages once the
storey-2 drift ``x2 - x1`` exceeds the gap, pushing the two floors apart
with force ``k_b * (drift - gap)``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg, signal

from .errors import ConfigError, DivergenceError
from .signalio import Manifest, Record, Scenario

__all__ = [
    "FrameSpec",
    "ExcitationSpec",
    "Response",
    "simulate_response",
    "simulate_record",
    "simulate_batch",
    "build_synthetic_dataset",
    "modal_frequencies",
    "default_scenarios",
    "OVERSAMPLE",
]

OVERSAMPLE = 8


@dataclass(frozen=True)
class FrameSpec:
    """Three-storey frame properties (SI units).

    ``stiffness_factors`` scale ``story_stiffness`` to model damage;
    ``added_mass`` is ``(location, kg)`` with location 1..3 for a floor or
    ``"base"``.
    """

    masses: tuple = (6.0, 6.0, 6.0)
    story_stiffness: tuple = (1.2e6, 1.2e6, 1.2e6)
    damping_ratio: float = 0.02
    stiffness_factors: tuple = (1.0, 1.0, 1.0)
    bumper_gap_m: float | None = None
    bumper_stiffness: float = 6.0e6
    added_mass: tuple | None = None
    base_mass: float = 10.0

    def __post_init__(self):
        if len(self.masses) != 3 or len(self.story_stiffness) != 3 or len(self.stiffness_factors) != 3:
            raise ConfigError("frame needs exactly three storeys")
        if any(m <= 0 for m in self.masses) or any(k <= 0 for k in self.story_stiffness):
            raise ConfigError("masses and stiffnesses must be positive")
        if not 0 < self.damping_ratio < 0.2:
            raise ConfigError("damping_ratio must lie in (0, 0.2)")
        if any(not 0 < f <= 1 for f in self.stiffness_factors):
            raise ConfigError("stiffness factors must lie in (0, 1]")
        if self.bumper_gap_m is not None and self.bumper_gap_m < 0:
            raise ConfigError("bumper gap must be nonnegative")
        if not self.bumper_stiffness > 0:
            raise ConfigError("bumper stiffness must be positive")
        if not self.base_mass > 0:
            raise ConfigError("base mass must be positive")
        if self.added_mass is not None:
            loc, kg = self.added_mass
            if loc not in (1, 2, 3, "base") or not kg > 0:
                raise ConfigError(f"invalid added mass {self.added_mass!r}")

    @property
    def has_bumper(self):
        return self.bumper_gap_m is not None and math.isfinite(self.bumper_gap_m)

    def mass_matrix(self):
        m = np.array(self.masses, dtype=float)
        if self.added_mass is not None and self.added_mass[0] != "base":
            m[int(self.added_mass[0]) - 1] += float(self.added_mass[1])
        return np.diag(m)

    def stiffness_matrix(self):
        k1, k2, k3 = np.array(self.story_stiffness) * np.array(self.stiffness_factors)
        return np.array([[k1 + k2, -k2, 0.0], [-k2, k2 + k3, -k3], [0.0, -k3, k3]])

    def damping_matrix(self):
        """Rayleigh damping matching ``damping_ratio`` at modes 1 and 3."""
        M, K = self.mass_matrix(), self.stiffness_matrix()
        w = np.sqrt(linalg.eigh(K, M, eigvals_only=True))
        w1, w3 = w[0], w[-1]
        z = self.damping_ratio
        a0 = 2.0 * z * w1 * w3 / (w1 + w3)
        a1 = 2.0 * z / (w1 + w3)
        return a0 * M + a1 * K

    def total_base_mass(self):
        extra = float(self.added_mass[1]) if self.added_mass is not None and self.added_mass[0] == "base" else 0.0
        return self.base_mass + extra

    def to_dict(self):
        return {
            "masses": list(self.masses),
            "story_stiffness": list(self.story_stiffness),
            "damping_ratio": self.damping_ratio,
            "stiffness_factors": list(self.stiffness_factors),
            "bumper_gap_m": self.bumper_gap_m,
            "bumper_stiffness": self.bumper_stiffness,
            "added_mass": list(self.added_mass) if self.added_mass is not None else None,
            "base_mass": self.base_mass,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("masses", "story_stiffness", "stiffness_factors"):
            if key in d:
                d[key] = tuple(float(v) for v in d[key])
        if d.get("added_mass") is not None:
            loc, kg = d["added_mass"]
            d["added_mass"] = (loc if loc == "base" else int(loc), float(kg))
        return cls(**d)


@dataclass(frozen=True)
class ExcitationSpec:
    """Shaker force applied to the base.

    ``kind="random"``: Gaussian white noise low-passed at 0.4 x sample rate,
    scaled to ``amplitude_n`` RMS. ``kind="sweep"``: linear sine sweep from
    ``sweep_hz[0]`` to ``sweep_hz[1]`` with peak ``amplitude_n``.
    The force is switched off after ``active_s`` seconds when given.
    """

    kind: str = "random"
    seed: int = 0
    duration_s: float = 6.4
    sample_rate_hz: float = 320.0
    amplitude_n: float = 120.0
    sweep_hz: tuple = (5.0, 150.0)
    active_s: float | None = None

    def __post_init__(self):
        if self.kind not in ("random", "sweep"):
            raise ConfigError(f"unknown excitation kind {self.kind!r}")
        if not (self.duration_s > 0 and self.sample_rate_hz > 0):
            raise ConfigError("duration and sample rate must be positive")
        if self.n_samples < 2:
            raise ConfigError("excitation yields fewer than 2 samples")
        if self.amplitude_n < 0:
            raise ConfigError("amplitude must be nonnegative")

    @property
    def n_samples(self):
        return int(round(self.duration_s * self.sample_rate_hz))

    def to_dict(self):
        return {
            "kind": self.kind,
            "seed": self.seed,
            "duration_s": self.duration_s,
            "sample_rate_hz": self.sample_rate_hz,
            "amplitude_n": self.amplitude_n,
            "sweep_hz": list(self.sweep_hz),
            "active_s": self.active_s,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "sweep_hz" in d:
            d["sweep_hz"] = tuple(d["sweep_hz"])
        return cls(**d)


def modal_frequencies(frame):
    """Undamped natural frequencies in Hz (ascending)."""
    w2 = linalg.eigh(frame.stiffness_matrix(), frame.mass_matrix(), eigvals_only=True)
    return np.sqrt(w2) / (2.0 * math.pi)


def _force(exc):
    """Shaker force on the fine integration grid (one extra sample at the end)."""
    n_fine = exc.n_samples * OVERSAMPLE + 1
    fine_rate = exc.sample_rate_hz * OVERSAMPLE
    t = np.arange(n_fine) / fine_rate
    if exc.kind == "random":
        rng = np.random.default_rng(exc.seed)
        pad = 4 * OVERSAMPLE * 16
        w = rng.standard_normal(n_fine + 2 * pad)
        sos = signal.butter(8, 0.4 * exc.sample_rate_hz, fs=fine_rate, output="sos")
        f = signal.sosfiltfilt(sos, w)[pad:pad + n_fine]
        f = f / np.sqrt(np.mean(f**2)) * exc.amplitude_n
    else:
        f0, f1 = exc.sweep_hz
        span = exc.active_s if exc.active_s is not None else exc.duration_s
        f = exc.amplitude_n * signal.chirp(t, f0=f0, t1=span, f1=f1, method="linear", phi=-90)
    if exc.active_s is not None:
        f = np.where(t <= exc.active_s, f, 0.0)
    return f


@dataclass
class Response:
    """Sampled simulation output for a batch of records.

    Arrays are ``(batch, n_samples, 3)``; ``contacts`` counts output samples
    with the bumper engaged.
    """

    acceleration: np.ndarray
    displacement: np.ndarray
    velocity: np.ndarray
    base_acceleration: np.ndarray
    contacts: np.ndarray
    sample_rate_hz: float


def simulate_batch(frame, forces, sample_rate_hz):
    """Integrate the frame for several force histories at once.

    Parameters
    ----------
    frame : FrameSpec
    forces : ndarray
        ``(batch, n_samples * OVERSAMPLE + 1)`` base forces on the fine grid.
    sample_rate_hz : float
        Output rate; integration runs at ``OVERSAMPLE`` times this.

    Returns
    -------
    Response
    """
    forces = np.atleast_2d(np.asarray(forces, dtype=float))
    B, n_fine = forces.shape
    n = (n_fine - 1) // OVERSAMPLE
    h = 1.0 / (sample_rate_hz * OVERSAMPLE)
    M, K, C = frame.mass_matrix(), frame.stiffness_matrix(), frame.damping_matrix()
    Minv = np.linalg.inv(M)
    A = np.zeros((6, 6))
    A[:3, 3:] = np.eye(3)
    A[3:, :3] = -Minv @ K
    A[3:, 3:] = -Minv @ C
    At = A.T.copy()
    ag = forces / frame.total_base_mass()
    bumper = frame.has_bumper
    gap = frame.bumper_gap_m if bumper else 0.0
    kb = frame.bumper_stiffness
    # bumper force direction in acceleration space: floor 1 pushed down, floor 2 up
    bump_dir = Minv @ np.array([1.0, -1.0, 0.0])

    def deriv(y, a_g):
        dy = y @ At
        dy[:, 3:] -= a_g[:, None]
        if bumper:
            pen = np.maximum(y[:, 1] - y[:, 0] - gap, 0.0)
            dy[:, 3:] += (kb * pen)[:, None] * bump_dir[None, :]
        return dy

    y = np.zeros((B, 6))
    disp = np.empty((B, n, 3))
    vel = np.empty((B, n, 3))
    acc = np.empty((B, n, 3))
    contacts = np.zeros(B, dtype=int)
    step = 0
    for i in range(n):
        d = deriv(y, ag[:, step])
        disp[:, i] = y[:, :3]
        vel[:, i] = y[:, 3:]
        acc[:, i] = d[:, 3:] + ag[:, step][:, None]
        if bumper:
            contacts += (y[:, 1] - y[:, 0] > gap)
        for _ in range(OVERSAMPLE):
            a0 = ag[:, step]
            a1 = ag[:, step + 1]
            am = 0.5 * (a0 + a1)
            k1 = d if _ == 0 else deriv(y, a0)
            k2 = deriv(y + 0.5 * h * k1, am)
            k3 = deriv(y + 0.5 * h * k2, am)
            k4 = deriv(y + h * k3, a1)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            step += 1
        if not np.all(np.isfinite(y)):
            raise DivergenceError(step)
    return Response(acc, disp, vel, ag[:, : n * OVERSAMPLE : OVERSAMPLE], contacts, float(sample_rate_hz))


def simulate_response(frame, excitation, scale=1.0):
    """Simulate one record and keep the full sampled state."""
    return simulate_batch(frame, scale * _force(excitation)[None, :], excitation.sample_rate_hz)


def simulate_record(frame, excitation, record_id="sim", scenario="sim"):
    """Simulate one record; channels are storey absolute accelerations."""
    resp = simulate_response(frame, excitation)
    return Record(record_id, scenario, excitation.sample_rate_hz, resp.acceleration[0].T)


def _record_seed(base_seed, label, index):
    digest = hashlib.sha256(f"{label}/{index}".encode("utf-8")).digest()
    ss = np.random.SeedSequence(entropy=int(base_seed) & (2**64 - 1), spawn_key=(int.from_bytes(digest[:8], "little"),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def build_synthetic_dataset(scenarios, n_per_scenario, excitation, descriptions=None, healthy_label=None):
    """Simulate ``n_per_scenario`` records for each ``(label, FrameSpec)``.

    Every record gets its own excitation seed derived from
    ``(excitation.seed, label, index)``.

    Returns
    -------
    (Manifest, list of Record)
    """
    scenarios = list(scenarios)
    labels = [lab for lab, _ in scenarios]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"duplicate scenario labels: {labels}")
    if int(n_per_scenario) < 1:
        raise ConfigError("n_per_scenario must be >= 1")
    if not scenarios:
        raise ConfigError("no scenarios given")
    descriptions = descriptions or {}
    records = []
    entries = []
    seeds = {}
    for label, frame in scenarios:
        excs = [
            replace(excitation, seed=_record_seed(excitation.seed, label, i)) for i in range(n_per_scenario)
        ]
        forces = np.stack([_force(e) for e in excs])
        resp = simulate_batch(frame, forces, excitation.sample_rate_hz)
        ids = []
        for i in range(n_per_scenario):
            rid = f"{label}_{i:03d}"
            ids.append(rid)
            seeds[rid] = excs[i].seed
            records.append(Record(rid, label, excitation.sample_rate_hz, resp.acceleration[i].T))
        entries.append(
            Scenario(label, descriptions.get(label, _describe(frame)), tuple(f"{r}.csv" for r in ids), n_per_scenario)
        )
        seeds.setdefault("_contacts", {})[label] = int(resp.contacts.sum())
    contacts = seeds.pop("_contacts")
    manifest = Manifest(
        scenarios=tuple(entries),
        sensor_count=3,
        record_length=excitation.n_samples,
        healthy_label=healthy_label or labels[0],
        sample_rate_hz=excitation.sample_rate_hz,
        notes={
            "generator": "vmdgarch.simulate",
            "excitation": excitation.to_dict(),
            "frames": {lab: fr.to_dict() for lab, fr in scenarios},
            "bumper_contact_samples": contacts,
            "record_seeds": seeds,
        },
    )
    return manifest, records


def _describe(frame):
    parts = []
    red = [f"storey {i + 1} stiffness x{f:g}" for i, f in enumerate(frame.stiffness_factors) if f != 1.0]
    parts.extend(red)
    if frame.has_bumper:
        parts.append(f"bumper gap = {frame.bumper_gap_m * 1e3:g} mm")
    if frame.added_mass is not None:
        loc, kg = frame.added_mass
        parts.append(f"mass = {kg:g} kg at " + ("the base" if loc == "base" else f"floor {loc}"))
    return "; ".join(parts) if parts else "healthy state"


def default_scenarios(gap_m=0.05e-3, reduction=0.5):
    """Healthy, storey-1 stiffness reduction and small-gap bumper frames."""
    base = FrameSpec()
    return [
        ("healthy", base),
        ("stiffness", replace(base, stiffness_factors=(reduction, 1.0, 1.0))),
        ("bumper", replace(base, bumper_gap_m=gap_m)),
    ]
