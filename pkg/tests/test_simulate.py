import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import linalg, signal

from vmdgarch.errors import ConfigError
from vmdgarch.simulate import (
    OVERSAMPLE,
    ExcitationSpec,
    FrameSpec,
    _force,
    build_synthetic_dataset,
    default_scenarios,
    modal_frequencies,
    simulate_batch,
    simulate_record,
    simulate_response,
)

SHORT = ExcitationSpec(seed=3, duration_s=1.0, amplitude_n=40.0)


def _energy(frame, resp):
    M, K = frame.mass_matrix(), frame.stiffness_matrix()
    x, v = resp.displacement[0], resp.velocity[0]
    e = 0.5 * np.einsum("ti,ij,tj->t", v, M, v) + 0.5 * np.einsum("ti,ij,tj->t", x, K, x)
    if frame.has_bumper:
        pen = np.maximum(x[:, 1] - x[:, 0] - frame.bumper_gap_m, 0.0)
        e = e + 0.5 * frame.bumper_stiffness * pen**2
    return e


class TestFrameSpec:
    def test_round_trip(self):
        f = FrameSpec(stiffness_factors=(0.5, 1.0, 1.0), bumper_gap_m=1e-4, added_mass=("base", 1.2))
        assert FrameSpec.from_dict(f.to_dict()) == f

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"masses": (1.0, 1.0)},
            {"damping_ratio": 0.0},
            {"damping_ratio": 0.2},
            {"stiffness_factors": (0.0, 1.0, 1.0)},
            {"stiffness_factors": (1.2, 1.0, 1.0)},
            {"bumper_gap_m": -1e-3},
            {"added_mass": (4, 1.0)},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            FrameSpec(**kwargs)

    def test_rayleigh_damping_ratio_at_modes_one_and_three(self):
        f = FrameSpec(damping_ratio=0.03)
        M, K, C = f.mass_matrix(), f.stiffness_matrix(), f.damping_matrix()
        w2, phi = linalg.eigh(K, M)
        w = np.sqrt(w2)
        zeta = np.diag(phi.T @ C @ phi) / (2.0 * w)
        assert zeta[0] == pytest.approx(0.03, rel=1e-10)
        assert zeta[2] == pytest.approx(0.03, rel=1e-10)
        assert zeta[1] < 0.03

    def test_added_floor_mass(self):
        f = FrameSpec(added_mass=(2, 1.5))
        assert f.mass_matrix()[1, 1] == 7.5
        assert f.total_base_mass() == f.base_mass


class TestExcitation:
    def test_too_short(self):
        with pytest.raises(ConfigError):
            ExcitationSpec(duration_s=0.001, sample_rate_hz=320.0)

    def test_random_rms(self):
        f = _force(ExcitationSpec(seed=1, duration_s=4.0, amplitude_n=7.0))
        assert np.sqrt(np.mean(f**2)) == pytest.approx(7.0, rel=1e-12)

    def test_band_limit(self):
        exc = ExcitationSpec(seed=2, duration_s=8.0)
        f = _force(exc)
        freqs, p = signal.welch(f, fs=exc.sample_rate_hz * OVERSAMPLE, nperseg=4096)
        inband = p[freqs < 0.3 * exc.sample_rate_hz].mean()
        outband = p[freqs > 0.6 * exc.sample_rate_hz].mean()
        assert outband < 1e-6 * inband

    def test_force_stops(self):
        exc = ExcitationSpec(kind="sweep", duration_s=2.0, active_s=0.5)
        f = _force(exc)
        t = np.arange(f.size) / (exc.sample_rate_hz * OVERSAMPLE)
        assert np.all(f[t > 0.5] == 0.0)
        assert np.any(f[t < 0.5] != 0.0)


class TestSimulateRecord:
    def test_free_response_peaks_match_eigenfrequencies(self):
        frame = FrameSpec(damping_ratio=0.005)
        exc = ExcitationSpec(seed=5, duration_s=40.0, active_s=1.0, amplitude_n=40.0)
        rec = simulate_record(frame, exc)
        free = rec.channels[:, int(2.0 * exc.sample_rate_hz):]
        nfft = 1 << 18
        spec = np.abs(np.fft.rfft(free * np.hanning(free.shape[1]), n=nfft, axis=1))
        spec = (spec / spec.max(axis=1, keepdims=True)).sum(axis=0)
        freqs = np.fft.rfftfreq(nfft, 1.0 / exc.sample_rate_hz)
        # higher modes are weak in acceleration; rank peaks on a log scale
        peaks, props = signal.find_peaks(np.log(spec), prominence=1.0)
        top = np.sort(freqs[peaks[np.argsort(props["prominences"])[-3:]]])
        np.testing.assert_allclose(top, modal_frequencies(frame), rtol=0.02)

    def test_deterministic(self):
        a = simulate_record(FrameSpec(), SHORT).channels
        b = simulate_record(FrameSpec(), SHORT).channels
        assert a.tobytes() == b.tobytes()

    def test_channels_are_storey_accelerations(self):
        rec = simulate_record(FrameSpec(), SHORT, "x", "y")
        assert rec.n_channels == 3 and rec.length == SHORT.n_samples
        assert rec.id == "x" and rec.scenario == "y"

    def test_absent_vs_huge_gap_identical(self):
        a = simulate_record(FrameSpec(), SHORT).channels
        b = simulate_record(FrameSpec(bumper_gap_m=1.0), SHORT).channels
        assert a.tobytes() == b.tobytes()

    def test_smaller_gap_more_contacts(self):
        exc = replace(SHORT, duration_s=4.0)
        near = simulate_response(FrameSpec(bumper_gap_m=0.05e-3), exc).contacts[0]
        far = simulate_response(FrameSpec(bumper_gap_m=0.20e-3), exc).contacts[0]
        assert near > far > 0

    def test_superposition_linear(self):
        base = simulate_response(FrameSpec(), SHORT).acceleration
        scaled = simulate_response(FrameSpec(), SHORT, scale=3.0).acceleration
        err = np.linalg.norm(scaled - 3.0 * base) / np.linalg.norm(3.0 * base)
        assert err < 1e-8

    def test_superposition_fails_with_bumper(self):
        frame = FrameSpec(bumper_gap_m=0.05e-3)
        base = simulate_response(frame, SHORT)
        scaled = simulate_response(frame, SHORT, scale=3.0)
        assert base.contacts[0] > 0
        err = np.linalg.norm(scaled.acceleration - 3.0 * base.acceleration) / np.linalg.norm(3.0 * base.acceleration)
        assert err > 1e-3

    @pytest.mark.parametrize("gap", [None, 0.05e-3])
    def test_energy_non_increasing_after_force_stops(self, gap):
        frame = FrameSpec(bumper_gap_m=gap)
        exc = ExcitationSpec(seed=8, duration_s=3.0, active_s=1.0, amplitude_n=40.0)
        resp = simulate_response(frame, exc)
        e = _energy(frame, resp)[int(1.0 * exc.sample_rate_hz) + 1:]
        assert e[0] > 0
        assert np.all(np.diff(e) <= 1e-9 * e[0])

    def test_batch_matches_single(self):
        excs = [replace(SHORT, seed=s) for s in (1, 2)]
        batch = simulate_batch(FrameSpec(), np.stack([_force(e) for e in excs]), SHORT.sample_rate_hz)
        single = simulate_response(FrameSpec(), excs[1])
        np.testing.assert_allclose(batch.acceleration[1], single.acceleration[0], rtol=0, atol=1e-12)

    def test_stiffness_reduction_lowers_first_mode(self):
        healthy, damaged = (fr for _, fr in default_scenarios()[:2])
        assert modal_frequencies(damaged)[0] < modal_frequencies(healthy)[0]


class TestBuildSyntheticDataset:
    def test_seventeen_by_ten(self):
        exc = ExcitationSpec(duration_s=0.05)
        scen = [(f"S{i}", FrameSpec(stiffness_factors=(1.0 - 0.02 * i, 1.0, 1.0))) for i in range(17)]
        manifest, records = build_synthetic_dataset(scen, 10, exc)
        assert len(records) == 170
        assert len(manifest.scenarios) == 17
        assert all(s.records == 10 for s in manifest.scenarios)

    def test_nine_by_fifty(self):
        exc = ExcitationSpec(duration_s=0.02)
        scen = [(f"S{i}", FrameSpec(stiffness_factors=(1.0 - 0.05 * i, 1.0, 1.0))) for i in range(9)]
        _, records = build_synthetic_dataset(scen, 50, exc)
        assert len(records) == 450

    def test_one_per_label(self):
        _, records = build_synthetic_dataset(default_scenarios(), 1, ExcitationSpec(duration_s=0.1))
        assert [r.scenario for r in records] == ["healthy", "stiffness", "bumper"]

    def test_distinct_seeds(self):
        manifest, records = build_synthetic_dataset(default_scenarios(), 4, ExcitationSpec(duration_s=0.1))
        seeds = manifest.notes["record_seeds"]
        assert len(set(seeds.values())) == len(records)

    def test_duplicate_labels(self):
        scen = [("a", FrameSpec()), ("a", FrameSpec())]
        with pytest.raises(ConfigError, match="duplicate"):
            build_synthetic_dataset(scen, 1, ExcitationSpec(duration_s=0.1))

    def test_zero_records(self):
        with pytest.raises(ConfigError):
            build_synthetic_dataset(default_scenarios(), 0, ExcitationSpec(duration_s=0.1))

    def test_manifest_records_calibration(self):
        manifest, _ = build_synthetic_dataset(default_scenarios(), 2, ExcitationSpec(duration_s=0.5, amplitude_n=40.0))
        notes = manifest.notes
        assert notes["excitation"]["amplitude_n"] == 40.0
        assert set(notes["bumper_contact_samples"]) == {"healthy", "stiffness", "bumper"}
        assert manifest.healthy_label == "healthy"
        assert math.isclose(manifest.sample_rate_hz, 320.0)
