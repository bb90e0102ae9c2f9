"""Command-line interface.

Every subcommand reads the same config file (YAML or JSON; omitted keys take
their defaults) and works on the stage cache under ``output_dir``. Stage
subcommands build only their own stage and fail, naming the producing
subcommand, when an upstream artifact is missing. ``run`` builds everything.

Exit status is 0 on success; on failure a JSON object describing the error is
written to stderr and the status is nonzero.
"""

from __future__ import annotations

import argparse
import csv
import json
import shutil
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from .errors import ConfigError, MissingArtifactError, StageError
from .pipeline import Pipeline, PipelineConfig, config_schema, sweep
from .signalio import format_float

EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_STAGE = 4
EXIT_OTHER = 1


def _float_list(text):
    out = []
    for tok in text.split(","):
        tok = tok.strip().lower()
        if tok in ("inf", "infinity", "none", "clean"):
            out.append(None)
        else:
            out.append(float(tok))
    return out


def _int_list(text):
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _load_config(args):
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if args.output_dir is not None:
        cfg = replace(cfg, output_dir=args.output_dir)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _print_json(obj):
    print(json.dumps(obj, indent=2))


def cmd_simulate(args):
    pipe = Pipeline(_load_config(args))
    manifest, records = pipe.dataset()
    where = pipe.config.dataset or str(pipe.stage_dir("dataset"))
    _print_json({"dataset": where, "records": len(records), "scenarios": list(manifest.labels)})


def _out_dir(pipe):
    out = Path(pipe.config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_decompose(args):
    pipe = Pipeline(_load_config(args))
    _, records, counts, imfs = pipe.decompose(upstream=False)
    target = _out_dir(pipe) / "imfs"
    target.mkdir(exist_ok=True)
    summary = {}
    for rec in records:
        summary[rec.id] = []
        for s, st in enumerate(imfs[rec.id]):
            with open(target / f"{rec.id}_sensor{s + 1}.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow([f"imf{k + 1}" for k in range(st.d)] + ["residual"])
                for row in zip(*st.modes, st.residual):
                    w.writerow([format_float(v) for v in row])
            summary[rec.id].append(st.summary())
    (target / "summary.json").write_text(json.dumps({"imf_counts": list(counts), "records": summary}, indent=2))
    _print_json({"imfs": str(target), "records": len(records), "imf_counts": list(counts)})


def cmd_features(args):
    pipe = Pipeline(_load_config(args))
    fm = pipe.features(upstream=False)
    dest = _out_dir(pipe) / "features.csv"
    shutil.copyfile(pipe.stage_dir("features") / "features.csv", dest)
    _print_json({"features": str(dest), "rows": fm.n_rows, "columns": fm.n_f})


def cmd_reduce(args):
    pipe = Pipeline(_load_config(args))
    _, reduced = pipe.reduce(upstream=False)
    out = _out_dir(pipe)
    for name in ("reduction.json", "reduced.csv"):
        shutil.copyfile(pipe.stage_dir("reduce") / name, out / name)
    _print_json({"reduced": str(out / "reduced.csv"), "models": str(out / "reduction.json"), "columns": reduced.n_f})


def cmd_evaluate(args):
    pipe = Pipeline(_load_config(args))
    report = pipe.evaluate(upstream=False)
    out = _out_dir(pipe)
    for src in sorted(pipe.stage_dir("evaluate").iterdir()):
        if src.suffix in (".json", ".csv"):
            shutil.copyfile(src, out / src.name)
    _print_json({"report": str(out / "report.json"), "summary": report["summary"]})


def cmd_diagnose(args):
    pipe = Pipeline(_load_config(args))
    rep = pipe.diagnose(upstream=False, q=args.q, significance=args.significance)
    out = _out_dir(pipe)
    rep.write_csv(out / "kurtosis.csv", 7)
    rep.write_csv(out / "arch_test.csv", 8)
    _print_json({"kurtosis": str(out / "kurtosis.csv"), "arch_test": str(out / "arch_test.csv")})


def cmd_sweep(args):
    cfg = _load_config(args)
    lengths = _int_list(args.lengths) if args.lengths else None
    snrs = _float_list(args.snrs) if args.snrs else None
    modes = [m.strip() for m in args.modes.split(",")] if args.modes else None
    header, rows = sweep(cfg, lengths, snrs, modes)
    out = Path(args.out) if args.out else Path(cfg.output_dir) / "sweep.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    _print_json({"sweep": str(out), "rows": len(rows)})


def cmd_run(args):
    pipe = Pipeline(_load_config(args))
    report = pipe.run()
    _print_json({"report": str(Path(pipe.config.output_dir) / "report.json"), "summary": report["summary"]})


def cmd_config(args):
    if args.action == "schema":
        print(yaml.safe_dump(config_schema(), sort_keys=False), end="")
    else:
        cfg = _load_config(args)
        print(yaml.safe_dump(json.loads(json.dumps(cfg.to_dict(), default=str)), sort_keys=False), end="")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="vmdgarch", description="VMD-GARCH structural damage classification pipeline."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("-c", "--config", help="YAML or JSON config file (defaults when omitted)")
        p.add_argument("-o", "--output-dir", help="override output_dir")
        p.add_argument("--seed", type=int, help="override the root seed")

    specs = [
        ("simulate", cmd_simulate, "simulate (or validate) the dataset"),
        ("decompose", cmd_decompose, "segment, add noise and split records into IMFs"),
        ("features", cmd_features, "fit GARCH models to every IMF"),
        ("reduce", cmd_reduce, "fit the reduction scenario on all records"),
        ("evaluate", cmd_evaluate, "cross-validate the configured classifiers"),
        ("diagnose", cmd_diagnose, "ARCH tests and kurtosis of the IMFs"),
        ("sweep", cmd_sweep, "accuracy over segment lengths and/or SNR values"),
        ("run", cmd_run, "every stage end to end"),
    ]
    for name, fn, helptext in specs:
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.set_defaults(func=fn)
        if name == "diagnose":
            p.add_argument("--q", type=int, default=1, help="ARCH test lags (default 1)")
            p.add_argument("--significance", type=float, default=0.05)
        if name == "sweep":
            p.add_argument("--lengths", help="comma-separated segment lengths, e.g. 512,1024,2048")
            p.add_argument("--snrs", help="comma-separated SNR values in dB; 'inf' for clean")
            p.add_argument("--modes", help="comma-separated reduction scenarios, e.g. SA,SD")
            p.add_argument("--out", help="CSV path (default <output_dir>/sweep.csv)")

    p = sub.add_parser("config", help="print the config schema or a materialized config")
    p.add_argument("action", choices=["schema", "show"])
    common(p)
    p.set_defaults(func=cmd_config)
    return parser


def _error_payload(exc):
    if isinstance(exc, StageError):
        return EXIT_STAGE, {"error": "StageError", **exc.to_dict()}
    if isinstance(exc, MissingArtifactError):
        return EXIT_MISSING, {
            "error": "MissingArtifactError",
            "message": str(exc),
            "artifact": exc.artifact,
            "producer": exc.producer,
        }
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG, {"error": "ConfigError", "message": str(exc)}
    return EXIT_OTHER, {"error": type(exc).__name__, "message": str(exc)}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:  # every failure is reported as JSON
        code, payload = _error_payload(exc)
        print(json.dumps(payload), file=sys.stderr)
        return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
