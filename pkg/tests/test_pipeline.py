import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from conftest import tiny_config_dict
from vmdgarch.errors import ConfigError, MissingArtifactError
from vmdgarch.pipeline import (
    Pipeline,
    PipelineConfig,
    SimulationConfig,
    config_schema,
    run_pipeline,
    sub_seed,
    sweep,
)


class TestConfig:
    def test_defaults_materialize(self):
        d = PipelineConfig().to_dict()
        assert d["imf_counts"] == [7, 7, 7]
        assert d["reduction"]["mode"] == "SD"
        assert [c["kind"] for c in d["classifiers"]] == ["knn", "svm", "tree"]

    def test_round_trip(self, tiny_config):
        cfg = PipelineConfig.from_dict(tiny_config)
        assert PipelineConfig.from_dict(cfg.to_dict()) == cfg

    def test_yaml_round_trip(self, tmp_path, tiny_config):
        cfg = PipelineConfig.from_dict(tiny_config)
        cfg.dump(tmp_path / "c.yaml")
        assert PipelineConfig.load(tmp_path / "c.yaml") == cfg

    def test_partial_excitation_keeps_study_defaults(self):
        sim = SimulationConfig.from_dict({"excitation": {"duration_s": 2.0}})
        assert sim.excitation.amplitude_n == SimulationConfig().excitation.amplitude_n
        assert sim.excitation.duration_s == 2.0

    def test_excitation_seed_rejected(self):
        with pytest.raises(ConfigError, match="seeds"):
            SimulationConfig.from_dict({"excitation": {"seed": 3}})

    @pytest.mark.parametrize(
        "patch",
        [{"bogus": 1}, {"folds": 1}, {"imf_counts": "many"}, {"seeds": {"weather": 1}}, {"segment_length": 4}],
    )
    def test_invalid(self, patch, tiny_config):
        with pytest.raises(ConfigError):
            PipelineConfig.from_dict({**tiny_config, **patch})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="does not exist"):
            PipelineConfig.load(tmp_path / "nope.yaml")

    def test_schema_documents_every_default(self):
        schema = config_schema()
        assert set(schema) == set(PipelineConfig().to_dict())
        assert all(v["description"] for v in schema.values())

    def test_named_streams(self):
        cfg = PipelineConfig(seed=4, seeds={"noise": 11})
        assert cfg.stream_seed("noise") == 11
        assert cfg.stream_seed("folds") == sub_seed(4, "folds")
        assert len({sub_seed(4, n) for n in ("excitation", "noise", "folds")}) == 3


class TestPipeline:
    def test_end_to_end(self, tiny_config):
        report = run_pipeline(tiny_config)
        out = tiny_config["output_dir"]
        assert report["data"]["n_records"] == 18
        assert report["data"]["n_features"] == 12
        assert {s["classifier"] for s in report["summary"]} == {"kNN", "Fine Tree"}
        for ev in report["evaluations"]:
            assert np.sum(ev["confusion"]["counts"]) == 18
            assert 0.0 <= ev["accuracy"] <= 100.0
        for name in ("report.json", "config.yaml", "run.log", "confusion_knn.csv", "confusion_tree.csv"):
            assert (Path(out) / name).is_file(), name

    def test_broken_dataset_path_fails_before_compute(self, tmp_path):
        cfg = PipelineConfig.from_dict(tiny_config_dict(tmp_path / "out", dataset=str(tmp_path / "missing")))
        with pytest.raises(ConfigError, match="does not exist"):
            Pipeline(cfg)
        assert not (tmp_path / "out").exists()

    def test_missing_upstream_names_producer(self, tiny_config):
        pipe = Pipeline(PipelineConfig.from_dict(tiny_config))
        with pytest.raises(MissingArtifactError) as info:
            pipe.features(upstream=False)
        assert info.value.producer == "decompose"
        with pytest.raises(MissingArtifactError) as info:
            Pipeline(PipelineConfig.from_dict(tiny_config)).evaluate(upstream=False)
        assert info.value.producer == "features"

    def test_reproducible_bytes(self, tmp_path):
        a = tiny_config_dict(tmp_path / "a")
        b = tiny_config_dict(tmp_path / "b")
        run_pipeline(a)
        run_pipeline(b)
        assert (tmp_path / "a/report.json").read_bytes() == (tmp_path / "b/report.json").read_bytes()
        assert json.loads((tmp_path / "a/report.json").read_text())["config"]["output_dir"] is None

    def test_deleting_mid_stage_rebuilds_identically(self, tiny_config):
        cfg = PipelineConfig.from_dict(tiny_config)
        run_pipeline(cfg)
        pipe = Pipeline(cfg)
        feat = pipe.stage_dir("features") / "features.csv"
        before_feat = feat.read_bytes()
        before_report = (pipe.out / "report.json").read_bytes()
        shutil.rmtree(pipe.stage_dir("features"))
        shutil.rmtree(pipe.stage_dir("evaluate"))
        run_pipeline(cfg)
        assert feat.read_bytes() == before_feat
        assert (pipe.out / "report.json").read_bytes() == before_report

    def test_cache_reused(self, tiny_config):
        cfg = PipelineConfig.from_dict(tiny_config)
        run_pipeline(cfg)
        pipe = Pipeline(cfg)
        marker = pipe.stage_dir("decompose") / "imfs.json"
        stamp = marker.stat().st_mtime_ns
        run_pipeline(cfg)
        assert marker.stat().st_mtime_ns == stamp

    def test_sa_and_sd_share_folds(self, tmp_path):
        sa = run_pipeline(tiny_config_dict(tmp_path / "o", reduction={"mode": "SA"}))
        sd = run_pipeline(tiny_config_dict(tmp_path / "o", reduction={"mode": "SD", "ridge": 0.1}))
        assert sa["evaluations"][0]["folds"] == sd["evaluations"][0]["folds"]
        assert sa["evaluations"][0]["n_features_per_fold"] != sd["evaluations"][0]["n_features_per_fold"]
        assert set(sa["evaluations"][0]["n_features_per_fold"]) == {12}

    def test_noise_changes_signals_not_dataset(self, tmp_path):
        clean = Pipeline(PipelineConfig.from_dict(tiny_config_dict(tmp_path / "o")))
        noisy = Pipeline(PipelineConfig.from_dict(tiny_config_dict(tmp_path / "o", snr_db=5.0)))
        assert clean.stage_dir("dataset") == noisy.stage_dir("dataset")
        assert clean.stage_dir("decompose") != noisy.stage_dir("decompose")
        _, a = clean.signals()
        _, b = noisy.signals()
        assert not np.array_equal(a[0].channels, b[0].channels)

    def test_loaded_dataset(self, tmp_path):
        sim = Pipeline(PipelineConfig.from_dict(tiny_config_dict(tmp_path / "o")))
        sim.dataset()
        data_dir = sim.stage_dir("dataset")
        cfg = PipelineConfig.from_dict(tiny_config_dict(tmp_path / "p", dataset=str(data_dir)))
        _, records = Pipeline(cfg).dataset()
        assert len(records) == 18

    def test_auto_imf_counts(self, tmp_path):
        cfg = PipelineConfig.from_dict(tiny_config_dict(tmp_path / "o", imf_counts="auto", auto_imf_range=[1, 4]))
        pipe = Pipeline(cfg)
        manifest, records = pipe.signals()
        counts = pipe.imf_counts(manifest, records)
        assert len(counts) == 3 and all(1 <= d <= 4 for d in counts)

    def test_diagnose_tables(self, tiny_config):
        pipe = Pipeline(PipelineConfig.from_dict(tiny_config))
        rep = pipe.diagnose()
        assert len(rep.rows) == 6
        assert all(r["n"] == 18 for r in rep.rows)


class TestSweep:
    def test_single_length(self, tiny_config):
        header, rows = sweep(PipelineConfig.from_dict(tiny_config), lengths=[384])
        assert header == ["scenario", "classifier", "384", "Max", "Min", "Delta_max(%)"]
        assert all(row[-1] == 0.0 for row in rows)

    def test_length_grid(self, tiny_config):
        header, rows = sweep(PipelineConfig.from_dict(tiny_config), lengths=[256, 384], modes=["SA", "SD"])
        assert header[2:4] == ["256", "384"]
        assert len(rows) == 4
        for row in rows:
            assert row[-3] == max(row[2:4]) and row[-2] == min(row[2:4])

    def test_needs_grid(self, tiny_config):
        with pytest.raises(ConfigError):
            sweep(PipelineConfig.from_dict(tiny_config))
