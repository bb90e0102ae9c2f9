"""Dataset ingestion, scenario manifests, segmentation and noise injection.

On-disk layout of a dataset directory::

    manifest.json
    <record id>.csv      one per record; columns = sensors, rows = samples, no header

``manifest.json`` holds the sample rate, sensor count, record length, the
healthy label and one entry per scenario with its description and file list.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DatasetEmptyError, DatasetError, DegenerateSignalError

__all__ = [
    "Record",
    "Scenario",
    "Manifest",
    "NoiseSpec",
    "load_dataset",
    "save_dataset",
    "segment",
    "add_noise",
    "empirical_snr_db",
    "format_float",
]

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1


def format_float(x):
    """Round-trip exact decimal text for a float (up to 17 significant digits)."""
    return format(float(x), ".17g")


@dataclass(frozen=True)
class Record:
    """One multi-channel acceleration measurement.

    ``channels`` is stored as a read-only ``(n_channels, n_samples)`` array.
    """

    id: str
    scenario: str
    sample_rate_hz: float
    channels: np.ndarray

    def __post_init__(self):
        ch = np.array(self.channels, dtype=float, copy=True)
        if ch.ndim == 1:
            ch = ch[None, :]
        if ch.ndim != 2:
            raise DatasetError("channels must be a 2-D array", record=self.id)
        if ch.shape[1] < 2:
            raise DatasetError("channels need at least 2 samples", record=self.id)
        if not (self.sample_rate_hz > 0 and math.isfinite(self.sample_rate_hz)):
            raise DatasetError("sample_rate_hz must be positive", record=self.id)
        ch.setflags(write=False)
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    @property
    def n_channels(self):
        return self.channels.shape[0]

    @property
    def length(self):
        return self.channels.shape[1]

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class Scenario:
    label: str
    description: str = ""
    files: tuple = ()
    records: int | None = None

    @property
    def count(self):
        return self.records if self.records is not None else len(self.files)


@dataclass(frozen=True)
class Manifest:
    """Scenario schema of a dataset.

    ``notes`` is free-form metadata (e.g. simulation calibration) that is
    carried through serialization untouched.
    """

    scenarios: tuple
    sensor_count: int
    record_length: int
    healthy_label: str
    sample_rate_hz: float = 1.0
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        labels = [s.label for s in self.scenarios]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate scenario labels in manifest: {labels}")
        if self.sensor_count < 1:
            raise ConfigError("sensor_count must be >= 1")
        if self.record_length < 2:
            raise ConfigError("record_length must be >= 2")
        if labels and self.healthy_label not in labels:
            raise ConfigError(f"healthy label {self.healthy_label!r} not among scenarios")

    @property
    def labels(self):
        return [s.label for s in self.scenarios]

    def to_dict(self):
        return {
            "version": MANIFEST_VERSION,
            "sample_rate_hz": self.sample_rate_hz,
            "sensor_count": self.sensor_count,
            "record_length": self.record_length,
            "healthy_label": self.healthy_label,
            "scenarios": [
                {
                    "label": s.label,
                    "description": s.description,
                    "records": s.count,
                    "files": list(s.files),
                }
                for s in self.scenarios
            ],
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            scenarios = tuple(
                Scenario(
                    label=str(s["label"]),
                    description=str(s.get("description", "")),
                    files=tuple(s.get("files", ())),
                    records=s.get("records"),
                )
                for s in d["scenarios"]
            )
            return cls(
                scenarios=scenarios,
                sensor_count=int(d["sensor_count"]),
                record_length=int(d["record_length"]),
                healthy_label=str(d["healthy_label"]),
                sample_rate_hz=float(d.get("sample_rate_hz", 1.0)),
                notes=dict(d.get("notes", {})),
            )
        except KeyError as exc:
            raise DatasetError(f"manifest is missing field {exc.args[0]!r}") from None

    @classmethod
    def read(cls, path):
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        if not path.exists():
            raise DatasetError(f"manifest not found: {path}")
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def write(self, path):
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class NoiseSpec:
    """White Gaussian noise at a target SNR; ``snr_db = inf`` disables noise."""

    snr_db: float
    seed: int = 0

    def __post_init__(self):
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            raise ConfigError(f"snr_db must be finite or +inf, got {self.snr_db}")


def _read_csv(path, record_id, sensor_count, record_length):
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) != sensor_count:
                raise DatasetError(
                    f"row {lineno} has {len(row)} columns, expected {sensor_count}",
                    record=record_id,
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise DatasetError(f"row {lineno} is not numeric", record=record_id) from None
    if len(rows) != record_length:
        raise DatasetError(
            f"length {len(rows)} does not match record_length {record_length}",
            record=record_id,
        )
    return np.asarray(rows, dtype=float).T


def load_dataset(path, manifest=None):
    """Load every record listed in a manifest.

    Parameters
    ----------
    path : path-like
        Dataset directory.
    manifest : Manifest, optional
        Defaults to ``<path>/manifest.json``.

    Returns
    -------
    list of Record
        In manifest order (scenarios, then files).
    """
    path = Path(path)
    if not path.is_dir():
        raise DatasetError(f"dataset directory not found: {path}")
    if manifest is None:
        if not (path / MANIFEST_NAME).exists():
            if not any(path.iterdir()):
                raise DatasetEmptyError(f"dataset directory is empty: {path}")
            raise DatasetError(f"manifest not found in {path}")
        manifest = Manifest.read(path)
    records = []
    for sc in manifest.scenarios:
        files = list(sc.files)
        if sc.records is not None:
            if len(files) < sc.records:
                raise DatasetError(
                    f"scenario {sc.label!r} lists {len(files)} files but declares "
                    f"{sc.records} records"
                )
            files = files[: sc.records]
        for fname in files:
            fpath = path / fname
            rid = Path(fname).stem
            if not fpath.exists():
                raise DatasetError(f"missing file {fname}", record=rid)
            channels = _read_csv(fpath, rid, manifest.sensor_count, manifest.record_length)
            records.append(Record(rid, sc.label, manifest.sample_rate_hz, channels))
    if not records:
        raise DatasetEmptyError(f"manifest at {path} lists no records")
    return records


def save_dataset(path, manifest, records):
    """Write records as headerless CSVs plus ``manifest.json``.

    The manifest's file lists are rebuilt from ``records`` so the two always
    agree; the returned manifest is the one written.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    by_label = {label: [] for label in manifest.labels}
    for rec in records:
        if rec.scenario not in by_label:
            raise DatasetError(f"scenario {rec.scenario!r} not in manifest", record=rec.id)
        fname = f"{rec.id}.csv"
        with open(path / fname, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for row in rec.channels.T:
                w.writerow([format_float(v) for v in row])
        by_label[rec.scenario].append(fname)
    scenarios = tuple(
        Scenario(s.label, s.description, tuple(by_label[s.label]), len(by_label[s.label]))
        for s in manifest.scenarios
    )
    out = dataclasses.replace(manifest, scenarios=scenarios)
    out.write(path / MANIFEST_NAME)
    return out


def segment(record, length):
    """Return the first ``length`` samples of every channel."""
    length = int(length)
    if not 2 <= length <= record.length:
        raise ConfigError(
            f"segment length {length} out of range [2, {record.length}] for record {record.id!r}"
        )
    if length == record.length:
        return record
    return record.replace(channels=record.channels[:, :length])


def _stream_seed(seed, record_id, channel):
    # stable across processes, unlike hash()
    digest = hashlib.sha256(record_id.encode("utf-8")).digest()
    rid = int.from_bytes(digest[:8], "little")
    return np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(rid, int(channel)))


def add_noise(record, spec):
    """Add zero-mean white Gaussian noise at ``spec.snr_db`` to every channel.

    Signal power is the mean square about zero. Each channel draws from an
    independent stream derived from ``(spec.seed, record.id, channel)``.
    """
    if math.isinf(spec.snr_db):
        return record
    power = np.mean(record.channels**2, axis=1)
    if np.any(power <= 0):
        bad = int(np.argmin(power))
        raise DegenerateSignalError(
            f"channel {bad} of record {record.id!r} has zero power; SNR is undefined"
        )
    noise_power = power / 10.0 ** (spec.snr_db / 10.0)
    noisy = np.empty_like(record.channels)
    for c in range(record.n_channels):
        rng = np.random.default_rng(_stream_seed(spec.seed, record.id, c))
        noisy[c] = record.channels[c] + math.sqrt(noise_power[c]) * rng.standard_normal(record.length)
    return record.replace(channels=noisy)


def empirical_snr_db(clean, noisy):
    """SNR in dB measured by subtracting the known clean signal."""
    clean = np.asarray(clean, dtype=float)
    noise = np.asarray(noisy, dtype=float) - clean
    return 10.0 * math.log10(np.mean(clean**2) / np.mean(noise**2))
