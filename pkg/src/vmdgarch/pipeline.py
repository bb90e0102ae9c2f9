"""End-to-end pipeline: configuration, content-hashed stage cache, run report.

Stage order: dataset (load or simulate), segment and noise, decompose,
GARCH features, reduction, cross-validated evaluation. Each stage writes its
artifacts under ``<output_dir>/cache/<stage>-<key>/`` where ``key`` hashes the
stage's own settings together with the key of the stage feeding it, so a
rerun reuses everything upstream of the first changed setting.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from .classify import ClassifierSpec, ReductionSpec, cross_validate, relative_variation
from .errors import ConfigError, MissingArtifactError, StageError, VmdGarchError
from .garch import FeatureMatrix, GarchOrder, extract_features, feature_column_map, garch_effect_report
from .reduce import Kernel, reduce_pipeline
from .signalio import Manifest, NoiseSpec, add_noise, format_float, load_dataset, save_dataset, segment
from .simulate import ExcitationSpec, FrameSpec, build_synthetic_dataset
from .vmd import ImfSet, VmdConfig, decompose, select_imf_count

__all__ = [
    "PipelineConfig",
    "SimulationConfig",
    "Pipeline",
    "run_pipeline",
    "config_schema",
    "sub_seed",
    "sweep",
]

log = logging.getLogger("vmdgarch")

SEED_STREAMS = ("excitation", "noise", "folds")


def sub_seed(root, name):
    """Seed of the named substream of ``root``; stable across platforms."""
    digest = hashlib.sha256(f"{int(root)}/{name}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def _canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def _key(*parts):
    return hashlib.sha256(_canonical(list(parts)).encode()).hexdigest()[:16]


def _jsonable(obj):
    """Replace non-finite floats by strings so reports are strict JSON."""
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def _dump_json(path, obj):
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=False) + "\n"
    Path(path).write_text(text)


@dataclass(frozen=True)
class SimulationConfig:
    """Synthetic dataset: the three default frames and one excitation recipe."""

    n_per_scenario: int = 30
    stiffness_reduction: float = 0.5
    bumper_gap_m: float = 0.05e-3
    excitation: ExcitationSpec = field(
        default_factory=lambda: ExcitationSpec(duration_s=25.61, amplitude_n=40.0)
    )
    frame: FrameSpec = field(default_factory=FrameSpec)

    def scenarios(self):
        base = self.frame
        return [
            ("healthy", base),
            ("stiffness", replace(base, stiffness_factors=(self.stiffness_reduction, 1.0, 1.0))),
            ("bumper", replace(base, bumper_gap_m=self.bumper_gap_m)),
        ]

    def to_dict(self):
        return {
            "n_per_scenario": self.n_per_scenario,
            "stiffness_reduction": self.stiffness_reduction,
            "bumper_gap_m": self.bumper_gap_m,
            "excitation": {k: v for k, v in self.excitation.to_dict().items() if k != "seed"},
            "frame": self.frame.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "excitation" in d:
            if "seed" in d["excitation"]:
                raise ConfigError("set the excitation seed through 'seeds: {excitation: ...}' or 'seed'")
            base = cls().excitation.to_dict()
            d["excitation"] = ExcitationSpec.from_dict({**base, **d["excitation"]})
        if "frame" in d:
            d["frame"] = FrameSpec.from_dict({**FrameSpec().to_dict(), **d["frame"]})
        return cls(**d)


def _default_classifiers():
    return (ClassifierSpec("knn"), ClassifierSpec("svm"), ClassifierSpec("tree"))


@dataclass(frozen=True)
class PipelineConfig:
    """Every setting of a run, with all defaults materialized.

    Exactly one of ``dataset`` (a directory readable by
    :func:`~vmdgarch.signalio.load_dataset`) and ``simulate`` is used;
    ``dataset`` wins when both are given.
    """

    dataset: str | None = None
    simulate: SimulationConfig | None = field(default_factory=SimulationConfig)
    segment_length: int | None = 8192
    snr_db: float | None = None
    imf_counts: tuple | str = (7, 7, 7)
    auto_imf_range: tuple = (2, 12)
    auto_imf_rel_drop: float = 0.05
    vmd: VmdConfig = field(default_factory=VmdConfig)
    garch: GarchOrder = field(default_factory=GarchOrder)
    reduction: ReductionSpec = field(default_factory=lambda: ReductionSpec("SD", Kernel("rbf"), 0.95, 0.1))
    classifiers: tuple = field(default_factory=_default_classifiers)
    folds: int = 5
    stratified: bool = True
    seed: int = 0
    seeds: dict = field(default_factory=dict)
    output_dir: str = "vmdgarch-out"
    workers: int = 1

    def __post_init__(self):
        if self.dataset is None and self.simulate is None:
            raise ConfigError("config needs either 'dataset' or 'simulate'")
        if self.segment_length is not None and int(self.segment_length) < 16:
            raise ConfigError("segment_length must be >= 16")
        if isinstance(self.imf_counts, str):
            if self.imf_counts != "auto":
                raise ConfigError("imf_counts must be a list of integers or 'auto'")
        elif not self.imf_counts or any(int(d) < 1 for d in self.imf_counts):
            raise ConfigError("imf_counts entries must be >= 1")
        if int(self.folds) < 2:
            raise ConfigError("folds must be >= 2")
        if not self.classifiers:
            raise ConfigError("at least one classifier is required")
        unknown = set(self.seeds) - set(SEED_STREAMS)
        if unknown:
            raise ConfigError(f"unknown seed streams {sorted(unknown)}; known: {list(SEED_STREAMS)}")
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1")

    def stream_seed(self, name):
        """Seed of a named substream, honouring explicit overrides."""
        value = self.seeds.get(name)
        return int(value) if value is not None else sub_seed(self.seed, name)

    def to_dict(self):
        vmd = {f.name: getattr(self.vmd, f.name) for f in fields(VmdConfig)}
        if not isinstance(vmd["init"], str):
            vmd["init"] = [float(v) for v in vmd["init"]]
        return {
            "dataset": self.dataset,
            "simulate": self.simulate.to_dict() if self.simulate is not None else None,
            "segment_length": self.segment_length,
            "snr_db": self.snr_db,
            "imf_counts": self.imf_counts if isinstance(self.imf_counts, str) else [int(d) for d in self.imf_counts],
            "auto_imf_range": [int(v) for v in self.auto_imf_range],
            "auto_imf_rel_drop": self.auto_imf_rel_drop,
            "vmd": vmd,
            "garch": {"r": self.garch.r, "m": self.garch.m},
            "reduction": self.reduction.to_dict() if self.reduction is not None else None,
            "classifiers": [c.to_dict() for c in self.classifiers],
            "folds": self.folds,
            "stratified": self.stratified,
            "seed": self.seed,
            "seeds": {name: int(v) for name, v in sorted(self.seeds.items()) if v is not None},
            "output_dir": self.output_dir,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if "simulate" in d and d["simulate"] is not None:
            d["simulate"] = SimulationConfig.from_dict(d["simulate"])
        if "vmd" in d:
            v = dict(d["vmd"])
            if isinstance(v.get("init"), list):
                v["init"] = tuple(v["init"])
            d["vmd"] = VmdConfig(**v)
        if "garch" in d:
            d["garch"] = GarchOrder(**d["garch"])
        if "reduction" in d and d["reduction"] is not None:
            d["reduction"] = ReductionSpec.from_dict({**ReductionSpec().to_dict(), **d["reduction"]})
        if "classifiers" in d:
            d["classifiers"] = tuple(ClassifierSpec.from_dict(c) for c in d["classifiers"])
        if isinstance(d.get("imf_counts"), list):
            d["imf_counts"] = tuple(int(v) for v in d["imf_counts"])
        if "auto_imf_range" in d:
            d["auto_imf_range"] = tuple(d["auto_imf_range"])
        if d.get("snr_db") in ("inf", "Infinity"):
            d["snr_db"] = None
        if d.get("seeds") is None:
            d.pop("seeds", None)
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {str(path)!r} does not exist")
        return cls.from_dict(yaml.safe_load(path.read_text()))

    def dump(self, path):
        Path(path).write_text(yaml.safe_dump(_jsonable(self.to_dict()), sort_keys=False))

    def validate_paths(self):
        if self.dataset is not None:
            p = Path(self.dataset)
            if not p.is_dir():
                raise ConfigError(f"dataset directory {self.dataset!r} does not exist")


_SCHEMA_DOC = {
    "dataset": "directory with manifest.json and one CSV per record; overrides 'simulate'",
    "simulate": "synthetic three-storey frame study (healthy, storey-1 stiffness loss, bumper)",
    "segment_length": "samples kept from the start of every record; null keeps all",
    "snr_db": "white Gaussian noise added at this SNR; null means no noise",
    "imf_counts": "modes per sensor, or 'auto' for residual-knee selection on a healthy record",
    "auto_imf_range": "inclusive [min, max] mode counts tried by 'auto'",
    "auto_imf_rel_drop": "relative residual drop below which more modes stop paying off",
    "vmd": "decomposition solver settings; the mode count d is taken from imf_counts",
    "garch": "GARCH order; features per IMF = r + m",
    "reduction": "SA none, SB KPCA, SC KDA, SD KPCA then KDA; refit inside every training fold",
    "classifiers": "list of classifier specs (kind knn, svm or tree)",
    "folds": "cross-validation folds",
    "stratified": "stratified folds (recommended for small classes)",
    "seed": "root seed; excitation, noise and folds use named substreams of it",
    "seeds": "optional explicit per-stream seeds overriding the derived ones",
    "output_dir": "directory for cache, reports and the materialized config",
    "workers": "processes for per-record stages",
}


def config_schema():
    """Every config key with its default and a one-line description."""
    defaults = PipelineConfig().to_dict()
    return {k: {"default": _jsonable(defaults[k]), "description": _SCHEMA_DOC[k]} for k in defaults}


def _load(path):
    manifest = Manifest.read(path)
    return manifest, load_dataset(path, manifest)


def _decompose_record(args):
    rec_id, channels, rate, cfgs = args
    out = []
    for ch, cfg in zip(channels, cfgs):
        out.append(decompose(ch, rate, cfg))
    return rec_id, out


def _features_record(args):
    rec_id, sets, order = args
    return rec_id, extract_features(sets, order)


class Pipeline:
    """Stage runner bound to one configuration and its output directory."""

    def __init__(self, config):
        if not isinstance(config, PipelineConfig):
            raise ConfigError("Pipeline expects a PipelineConfig")
        config.validate_paths()
        self.config = config
        self.out = Path(config.output_dir)
        self.cache = self.out / "cache"
        self._memo = {}

    # keys ------------------------------------------------------------------

    def _dataset_key(self):
        c = self.config
        if c.dataset is not None:
            h = hashlib.sha256()
            root = Path(c.dataset)
            for p in sorted(root.iterdir()):
                if p.is_file():
                    h.update(p.name.encode())
                    h.update(p.read_bytes())
            return _key("load", h.hexdigest())
        return _key("simulate", c.simulate.to_dict(), c.stream_seed("excitation"))

    def _signals_key(self):
        c = self.config
        noise = None if c.snr_db is None else [c.snr_db, c.stream_seed("noise")]
        return _key(self._dataset_key(), c.segment_length, noise)

    def _imf_key(self):
        c = self.config
        vmd = self.config.to_dict()["vmd"]
        counts = c.to_dict()["imf_counts"]
        auto = [list(c.auto_imf_range), c.auto_imf_rel_drop] if counts == "auto" else None
        return _key(self._signals_key(), vmd, counts, auto)

    def _feature_key(self):
        g = self.config.garch
        return _key(self._imf_key(), g.r, g.m)

    def _reduce_key(self):
        red = self.config.reduction
        return _key(self._feature_key(), red.to_dict() if red is not None else None)

    def _eval_key(self):
        c = self.config
        return _key(
            self._reduce_key(),
            [s.to_dict() for s in c.classifiers],
            c.folds,
            c.stratified,
            c.stream_seed("folds"),
        )

    def stage_dir(self, stage):
        key = {
            "dataset": self._dataset_key,
            "decompose": self._imf_key,
            "features": self._feature_key,
            "reduce": self._reduce_key,
            "evaluate": self._eval_key,
        }[stage]()
        return self.cache / f"{stage}-{key}"

    def _publish(self, stage, writer):
        """Write a stage into a temp dir and move it into place atomically."""
        final = self.stage_dir(stage)
        self.cache.mkdir(parents=True, exist_ok=True)
        tmp = Path(tempfile.mkdtemp(prefix=f".{stage}-", dir=self.cache))
        try:
            writer(tmp)
            (tmp / "COMPLETE").write_text("")
            if final.exists():
                shutil.rmtree(final)
            os.replace(tmp, final)
        finally:
            if tmp.exists():
                shutil.rmtree(tmp, ignore_errors=True)
        log.info("wrote %s", final.name)
        return final

    def _ready(self, stage):
        d = self.stage_dir(stage)
        return (d / "COMPLETE").is_file()

    def _need(self, stage, artifact, producer):
        if stage == "dataset" and self.config.dataset is not None:
            return
        if not self._ready(stage):
            raise MissingArtifactError(artifact, producer)

    # stages ----------------------------------------------------------------

    # Each stage method builds its own artifact when missing. With
    # ``upstream=False`` the artifacts it depends on must already exist.

    def dataset(self, upstream=True):
        """``(manifest, records)`` of the configured dataset."""
        if "dataset" in self._memo:
            return self._memo["dataset"]
        c = self.config
        if c.dataset is not None:
            try:
                result = _load(c.dataset)
            except VmdGarchError as exc:
                raise StageError("dataset", exc, getattr(exc, "record", None)) from exc
        else:
            if not self._ready("dataset"):
                exc_spec = replace(c.simulate.excitation, seed=c.stream_seed("excitation"))
                try:
                    manifest, records = build_synthetic_dataset(
                        c.simulate.scenarios(), c.simulate.n_per_scenario, exc_spec, healthy_label="healthy"
                    )
                except VmdGarchError as exc:
                    raise StageError("simulate", exc) from exc
                self._publish("dataset", lambda d: save_dataset(d, manifest, records))
            result = _load(self.stage_dir("dataset"))
        self._memo["dataset"] = result
        return result

    def signals(self, upstream=True):
        """Segmented and optionally noise-corrupted records."""
        if "signals" in self._memo:
            return self._memo["signals"]
        c = self.config
        if not upstream:
            self._need("dataset", "simulated dataset", "simulate")
        manifest, records = self.dataset()
        out = []
        noise = None if c.snr_db is None else NoiseSpec(c.snr_db, c.stream_seed("noise"))
        for rec in records:
            try:
                if c.segment_length is not None:
                    rec = segment(rec, int(c.segment_length))
                if noise is not None:
                    rec = add_noise(rec, noise)
            except VmdGarchError as exc:
                raise StageError("segment" if noise is None else "noise", exc, rec.id) from exc
            out.append(rec)
        self._memo["signals"] = (manifest, out)
        return manifest, out

    def imf_counts(self, manifest, records):
        c = self.config
        if c.imf_counts != "auto":
            counts = tuple(int(d) for d in c.imf_counts)
            if len(counts) == 1:
                counts = counts * manifest.sensor_count
            if len(counts) != manifest.sensor_count:
                raise ConfigError(
                    f"imf_counts has {len(counts)} entries for {manifest.sensor_count} sensors"
                )
            return counts
        ref = next((r for r in records if r.scenario == manifest.healthy_label), records[0])
        lo, hi = (int(v) for v in c.auto_imf_range)
        return tuple(
            select_imf_count(ch, ref.sample_rate_hz, c.vmd, range(lo, hi + 1), c.auto_imf_rel_drop)
            for ch in ref.channels
        )

    def _map(self, fn, items):
        if self.config.workers > 1 and len(items) > 1:
            with ProcessPoolExecutor(self.config.workers) as pool:
                return list(pool.map(fn, items))
        return [fn(it) for it in items]

    def decompose(self, upstream=True):
        """``(manifest, records, counts, {record id: [ImfSet per sensor]})``."""
        if "decompose" in self._memo:
            return self._memo["decompose"]
        manifest, records = self.signals(upstream)
        d = self.stage_dir("decompose")
        if self._ready("decompose"):
            meta = json.loads((d / "imfs.json").read_text())
            counts = tuple(meta["imf_counts"])
            imfs = {}
            with np.load(d / "imfs.npz") as z:
                for rec in records:
                    sets = []
                    for s, info in enumerate(meta["records"][rec.id]):
                        modes = z[f"{rec.id}/{s}"]
                        sets.append(
                            ImfSet(
                                modes=modes,
                                center_freqs_hz=np.asarray(info["center_freqs_hz"]),
                                residual=rec.channels[s] - modes.sum(axis=0),
                                iterations=info["iterations"],
                                converged=info["converged"],
                                rate_hz=rec.sample_rate_hz,
                            )
                        )
                    imfs[rec.id] = sets
        else:
            counts = self.imf_counts(manifest, records)
            cfgs = [self.config.vmd.with_d(dd) for dd in counts]
            jobs = [(r.id, np.asarray(r.channels), r.sample_rate_hz, cfgs) for r in records]
            try:
                results = self._map(_decompose_record, jobs)
            except VmdGarchError as exc:
                raise StageError("decompose", exc) from exc
            imfs = dict(results)

            def write(tmp):
                arrays = {f"{rid}/{s}": st.modes for rid, sets in imfs.items() for s, st in enumerate(sets)}
                np.savez(tmp / "imfs.npz", **arrays)
                meta = {
                    "imf_counts": list(counts),
                    "records": {rid: [st.summary() for st in sets] for rid, sets in imfs.items()},
                }
                _dump_json(tmp / "imfs.json", meta)

            self._publish("decompose", write)
        result = (manifest, records, counts, imfs)
        self._memo["decompose"] = result
        return result

    def features(self, upstream=True):
        """GARCH coefficient :class:`~vmdgarch.garch.FeatureMatrix`."""
        if "features" in self._memo:
            return self._memo["features"]
        d = self.stage_dir("features")
        if self._ready("features"):
            fm = FeatureMatrix.from_csv(d / "features.csv")
        else:
            if not upstream:
                self._need("decompose", "IMFs", "decompose")
            manifest, records, counts, imfs = self.decompose()
            order = self.config.garch
            jobs = [(r.id, imfs[r.id], order) for r in records]
            rows = {}
            for rec_id, sets, _ in jobs:
                try:
                    rows[rec_id] = _features_record((rec_id, sets, order))[1]
                except VmdGarchError as exc:
                    raise StageError("features", exc, rec_id) from exc
            fm = FeatureMatrix(
                np.array([rows[r.id] for r in records]),
                [r.scenario for r in records],
                tuple(r.id for r in records),
                feature_column_map(counts, order),
            )
            self._publish("features", lambda tmp: fm.to_csv(tmp / "features.csv"))
            fm = FeatureMatrix.from_csv(self.stage_dir("features") / "features.csv")
        self._memo["features"] = fm
        return fm

    def reduce(self, upstream=True):
        """Reduction models fitted on all records, plus the reduced matrix.

        Cross-validation never uses these: it refits inside every fold.
        """
        if not upstream:
            self._need("features", "features", "features")
        fm = self.features()
        red = self.config.reduction or ReductionSpec("SA")
        d = self.stage_dir("reduce")
        if self._ready("reduce"):
            return json.loads((d / "reduction.json").read_text()), FeatureMatrix.from_csv(d / "reduced.csv")
        try:
            models, reduced = reduce_pipeline(fm, red.mode, red.kernel, red.ncse_threshold, red.ridge)
        except VmdGarchError as exc:
            raise StageError("reduce", exc) from exc

        def write(tmp):
            models.save(tmp / "reduction.json")
            reduced.to_csv(tmp / "reduced.csv")

        self._publish("reduce", write)
        return json.loads((d / "reduction.json").read_text()), FeatureMatrix.from_csv(d / "reduced.csv")

    def evaluate(self, upstream=True):
        """Cross-validate every configured classifier; returns the report dict."""
        d = self.stage_dir("evaluate")
        if self._ready("evaluate"):
            return json.loads((d / "report.json").read_text())
        if not upstream:
            self._need("features", "features", "features")
        fm = self.features()
        c = self.config
        results = []
        for spec in c.classifiers:
            try:
                rep = cross_validate(spec, fm, c.folds, c.stream_seed("folds"), c.reduction, c.stratified)
            except VmdGarchError as exc:
                raise StageError("evaluate", exc) from exc
            results.append(rep)
        report = self._report(fm, results)

        def write(tmp):
            _dump_json(tmp / "report.json", report)
            for spec, rep in zip(c.classifiers, results):
                rep.confusion.write_csv(tmp / f"confusion_{spec.kind}.csv")

        self._publish("evaluate", write)
        return json.loads((d / "report.json").read_text())

    def _report(self, fm, results):
        c = self.config
        imf_meta = None
        dd = self.stage_dir("decompose") / "imfs.json"
        if dd.is_file():
            imf_meta = json.loads(dd.read_text())["imf_counts"]
        return {
            "format": "vmdgarch.report",
            "version": 1,
            "config": c.to_dict() | {"output_dir": None},
            "stream_seeds": {name: c.stream_seed(name) for name in SEED_STREAMS},
            "stages": {
                s: self.stage_dir(s).name for s in ("dataset", "decompose", "features", "reduce", "evaluate")
            },
            "data": {
                "n_records": fm.n_rows,
                "classes": fm.classes,
                "class_counts": {lab: int(np.sum(fm.labels == lab)) for lab in fm.classes},
                "imf_counts": imf_meta,
                "n_features": fm.n_f,
            },
            "summary": [
                {"classifier": r.classifier.name, "accuracy": r.accuracy, "f_score": r.f_score}
                for r in results
            ],
            "evaluations": [r.to_dict() for r in results],
        }

    def diagnose(self, upstream=True, q=1, significance=0.05):
        """ARCH test and kurtosis tables over all decomposed records."""
        if not upstream:
            self._need("decompose", "IMFs", "decompose")
        _, records, _, imfs = self.decompose()
        return garch_effect_report([imfs[r.id] for r in records], q, significance)

    # driver ----------------------------------------------------------------

    def run(self):
        """All stages; writes the materialized config and top-level report."""
        self.out.mkdir(parents=True, exist_ok=True)
        handler = logging.FileHandler(self.out / "run.log")
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
        log.addHandler(handler)
        prev = log.level
        log.setLevel(logging.INFO)
        try:
            log.info("run started %s", datetime.now(timezone.utc).isoformat())
            self.config.dump(self.out / "config.yaml")
            self.features()
            self.reduce()
            report = self.evaluate()
            _dump_json(self.out / "report.json", report)
            for spec in self.config.classifiers:
                shutil.copyfile(
                    self.stage_dir("evaluate") / f"confusion_{spec.kind}.csv", self.out / f"confusion_{spec.kind}.csv"
                )
            log.info("run finished %s", datetime.now(timezone.utc).isoformat())
            return report
        finally:
            log.removeHandler(handler)
            handler.close()
            log.setLevel(prev)


def run_pipeline(config):
    """Run every stage for ``config`` (a PipelineConfig, dict or path)."""
    if isinstance(config, (str, Path)):
        config = PipelineConfig.load(config)
    elif isinstance(config, dict):
        config = PipelineConfig.from_dict(config)
    return Pipeline(config).run()


def sweep(config, lengths=None, snrs=None, modes=None):
    """Accuracy grid over segment lengths and/or SNR values.

    Returns ``(header, rows)`` where each row is one (reduction mode,
    classifier) pair, columns follow the grid, then Max, Min and the
    relative variation in percent.
    """
    if not lengths and not snrs:
        raise ConfigError("sweep needs lengths and/or SNR values")
    grid = []
    for L in lengths or [config.segment_length]:
        for s in snrs or [config.snr_db]:
            grid.append((L, s))
    modes = modes or [config.reduction.mode if config.reduction is not None else "SA"]
    acc = {}
    for mode in modes:
        red = replace(config.reduction or ReductionSpec(), mode=mode)
        for L, s in grid:
            cfg = replace(config, segment_length=L, snr_db=s, reduction=red)
            report = Pipeline(cfg).evaluate()
            for item in report["summary"]:
                acc.setdefault((mode, item["classifier"]), []).append(item["accuracy"])

    def label(L, s):
        parts = []
        if lengths:
            parts.append(str(L))
        if snrs:
            parts.append("inf" if s is None or math.isinf(s) else format_float(s))
        return "/".join(parts)

    header = ["scenario", "classifier"] + [label(L, s) for L, s in grid] + ["Max", "Min", "Delta_max(%)"]
    rows = []
    for (mode, name), vals in acc.items():
        rows.append([mode, name, *vals, max(vals), min(vals), relative_variation(vals)])
    return header, rows
