import pytest
import yaml


def tiny_config_dict(output_dir, **overrides):
    """Small synthetic study that runs end to end in a few seconds."""
    cfg = {
        "simulate": {"n_per_scenario": 6, "excitation": {"duration_s": 1.6}},
        "segment_length": 384,
        "imf_counts": [2, 2, 2],
        "vmd": {"max_iter": 100},
        "reduction": {"mode": "SD", "kernel": {"kind": "rbf"}, "ridge": 0.1},
        "classifiers": [{"kind": "knn", "k": 3}, {"kind": "tree"}],
        "folds": 3,
        "seed": 0,
        "output_dir": str(output_dir),
    }
    cfg.update(overrides)
    return cfg


@pytest.fixture
def tiny_config(tmp_path):
    return tiny_config_dict(tmp_path / "out")


@pytest.fixture
def tiny_config_file(tmp_path, tiny_config):
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(tiny_config))
    return path


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Shared record of acceptance outcomes keyed by criterion number."""
    if not hasattr(request.config, "_acceptance"):
        request.config._acceptance = {}
    return request.config._acceptance


def pytest_terminal_summary(terminalreporter, config):
    results = getattr(config, "_acceptance", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, ok, elapsed, detail = results[number]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number:>2}: {title} ({elapsed:.1f} s) {detail}")
