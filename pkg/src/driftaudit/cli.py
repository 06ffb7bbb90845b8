"""Command-line entry point.

Subcommands: ingest, synth, audit-schedule, drift-cv, probe, curate,
audit (full pipeline) and report. Global flags ``--config``, ``--seed``,
``--threads`` and ``--out`` work on every subcommand; any config key can
also be overridden via ``DRIFTAUDIT_SECTION__KEY`` environment variables.

Exit codes: 0 clean, 1 error, 2 leakage detected (``audit`` only).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import AdapterSpec, apply_env_overrides, load_config
from .curation import auto_subset
from .driftmetrics import CvFilters
from .errors import AuditError, ConfigError
from .ingest import ingest_dataset, load_dataset
from .report import (
    AuditResults,
    EXIT_CLEAN,
    EXIT_ERROR,
    emit_plot_data,
    format_verdict,
    run_audit,
    window_spec_from_config,
    write_json,
)
from .schedule import DEFAULT_GAP_THRESHOLD_S, detect_sessions, schedule_stats
from .synth import SynthConfig, generate_dataset


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="path to the JSON config file")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--threads", type=int, default=1,
                   help="max worker threads (results are identical at any value)")
    p.add_argument("--out", help="output directory (default: config out_dir or ./out)")
    p.add_argument("--data", help="canonical dataset root (overrides dataset.root)")


def _load(args) -> dict:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = apply_env_overrides({}, os.environ)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out:
        cfg["out_dir"] = args.out
    if args.data:
        cfg.setdefault("dataset", {})["root"] = args.data
    if args.threads is not None and args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return cfg


def _out_dir(cfg: dict) -> Path:
    return Path(cfg.get("out_dir", "out"))


def _dataset(cfg: dict):
    root = cfg.get("dataset", {}).get("root")
    if not root:
        raise ConfigError("no dataset: pass --data or set dataset.root in the config")
    return load_dataset(root)


def _cmd_ingest(cfg: dict) -> int:
    adapter_cfg = cfg.get("adapter", {})
    raw_root = adapter_cfg.get("root")
    if not raw_root:
        raise ConfigError("ingest needs adapter.root in the config")
    adapter = AdapterSpec.from_mapping(adapter_cfg)
    out = _out_dir(cfg)
    dataset = ingest_dataset(raw_root, adapter, out)
    print(f"ingested {len(dataset)} trials -> {out} "
          f"({len(dataset.manifest.excluded)} files excluded)")
    return EXIT_CLEAN


def _cmd_synth(cfg: dict) -> int:
    if "synth" not in cfg:
        raise ConfigError("synth needs a synth section in the config")
    synth_cfg = dict(cfg["synth"])
    if "seed" in cfg:
        synth_cfg["seed"] = int(cfg["seed"])
    config = SynthConfig.from_mapping(synth_cfg)
    out = _out_dir(cfg)
    dataset, trace = generate_dataset(config, out)
    print(f"generated {len(dataset)} trials ({len(trace.entries)} trace entries) "
          f"-> {out}")
    return EXIT_CLEAN


def _cmd_audit_schedule(cfg: dict) -> int:
    dataset = _dataset(cfg)
    audit_cfg = cfg.get("audit", {})
    gap = float(audit_cfg.get("gap_threshold_s", DEFAULT_GAP_THRESHOLD_S))
    sessions = detect_sessions(dataset.manifest, gap)
    thr = {k: float(audit_cfg[k])
           for k in ("nmi_batched", "purity_batched", "nmi_randomized")
           if k in audit_cfg}
    report = schedule_stats(sessions, dataset.labels(), **thr)
    results = AuditResults(dataset=dataset, schedule_report=report)
    out = _out_dir(cfg)
    emit_plot_data(results, out)
    print(f"verdict: {report.verdict} (NMI={report.nmi:.3f}, "
          f"purity={report.mean_purity:.3f}, sessions={report.n_sessions})")
    return EXIT_CLEAN


def _cmd_drift_cv(cfg: dict) -> int:
    from .driftmetrics import cv_map

    dataset = _dataset(cfg)
    audit_cfg = cfg.get("audit", {})
    filters = None
    if "cv_filters" in audit_cfg:
        f = audit_cfg["cv_filters"]
        filters = CvFilters(
            fan_speed_mps=f.get("fan_speed_mps"),
            heater_voltage_v=f.get("heater_voltage_v"),
            gases=frozenset(f["gases"]) if f.get("gases") else None,
        )
    results = AuditResults(
        dataset=dataset,
        cv_sensor_rows=cv_map(dataset, "sensor_column", filters),
        cv_location_rows=cv_map(dataset, "location_board", filters),
    )
    out = _out_dir(cfg)
    emit_plot_data(results, out)
    worst = max(results.cv_sensor_rows, key=lambda r: r.cv_longterm)
    print(f"wrote CV tables to {out}; worst sensor: column {worst.column_index} "
          f"(long-term CV {worst.cv_longterm:.4f})")
    return EXIT_CLEAN


def _cmd_probe(cfg: dict, sensitivity: bool) -> int:
    from .probes import pca_snapshots, windowed_accuracy

    dataset = _dataset(cfg)
    probe_cfg = dict(cfg.get("probe", {}))
    if sensitivity:
        probe_cfg["sensitivity"] = True
    window = window_spec_from_config(probe_cfg)
    seed = int(cfg.get("seed", probe_cfg.get("seed", 0)))
    mode = probe_cfg.get("mode", "mean")
    kw = dict(
        mode=mode,
        n_repeats=int(probe_cfg.get("n_repeats", 10)),
        train_frac=float(probe_cfg.get("train_frac", 0.8)),
        C=float(probe_cfg.get("C", 1.0)),
        seed=seed,
        standardize=bool(probe_cfg.get("standardize", True)),
    )
    results = AuditResults(dataset=dataset, window=window)
    curve_raw, models = windowed_accuracy(dataset, window, compensated=False, **kw)
    results.curve_raw = curve_raw
    results.curve_compensated, _ = windowed_accuracy(
        dataset, window, compensated=True, **kw)
    if probe_cfg.get("sensitivity"):
        kw_flip = dict(kw, standardize=not kw["standardize"])
        results.curve_unstandardized, _ = windowed_accuracy(
            dataset, window, compensated=False, **kw_flip)
    results.pca_model, results.pca_projections = pca_snapshots(
        dataset, window, mode=mode, compensated=False)
    _, results.pca_projections_compensated = pca_snapshots(
        dataset, window, mode=mode, compensated=True)
    results.probe_meta = {
        "feature_mode": mode,
        "standardized": kw["standardize"],
        "window_width_s": window.width_s,
        "window_starts_s": list(window.start_times_s),
        "n_repeats": kw["n_repeats"],
        "train_frac": kw["train_frac"],
        "C": kw["C"],
        "seed": seed,
        "solver": {
            "max_epochs_used": max((max(m.epochs) for m in models), default=0),
            "max_duality_gap": max((max(m.gaps) for m in models), default=0.0),
        },
    }
    out = _out_dir(cfg)
    emit_plot_data(results, out)
    peak = float(curve_raw.mean.max())
    print(f"wrote probe artifacts to {out}; raw accuracy peak "
          f"{peak:.3f} (chance {curve_raw.chance:.3f})")
    return EXIT_CLEAN


def _cmd_curate(cfg: dict) -> int:
    dataset = _dataset(cfg)
    audit_cfg = cfg.get("audit", {})
    subset = auto_subset(
        dataset,
        gap_threshold_s=float(
            audit_cfg.get("gap_threshold_s", DEFAULT_GAP_THRESHOLD_S)),
        max_span_s=float(audit_cfg.get("max_span_s", 14 * 86400.0)),
        drop_worst_sensors=int(audit_cfg.get("drop_worst_sensors", 1)),
    )
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "subset_spec.json", subset.to_jsonable())
    print(f"subset: gases={sorted(subset.gases)} location={subset.location_index} "
          f"board={subset.board_index} sensors={sorted(subset.sensor_columns)}")
    return EXIT_CLEAN


def _cmd_audit(cfg: dict) -> int:
    out = _out_dir(cfg)
    verdict, _results = run_audit(cfg, out)
    print(format_verdict(verdict))
    return verdict.exit_code


def _cmd_report(cfg: dict) -> int:
    out = _out_dir(cfg)
    vpath = out / "audit_verdict.json"
    if not vpath.is_file():
        raise ConfigError(f"no audit_verdict.json under {out}; run `audit` first")
    verdict = json.loads(vpath.read_text())
    print("audit report")
    print("=" * 40)
    print(f"schedule:            {verdict['schedule_verdict']}")
    print(f"long-term leakage:   {verdict['longterm_leakage']['status']}")
    print(f"residual short-term: {verdict['residual_shortterm_leakage']['status']}")
    sub = verdict.get("recommended_subset")
    if sub:
        print(f"recommended subset:  gases={sub['gases']} "
              f"location={sub['location_index']} board={sub['board_index']} "
              f"sensors={sub['sensor_columns']}")
    for c in verdict.get("best_practice_checks", []):
        print(f"  [{c['status']:>7}] {c['name']}: {c['detail']}")
    mpath = out / "report_manifest.json"
    if mpath.is_file():
        manifest = json.loads(mpath.read_text())
        print("artifacts: " + ", ".join(manifest.get("emitted", [])))
        for o in manifest.get("omitted", []):
            print(f"  omitted {o['file']}: {o['reason']}")
    return EXIT_CLEAN


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="driftaudit",
        description="Audit multi-sensor gas recordings for drift-induced "
                    "label leakage.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("ingest", "convert a raw dataset to the canonical store"),
        ("synth", "generate a synthetic dataset with controllable drift"),
        ("audit-schedule", "detect sessions and score gas/time confounding"),
        ("drift-cv", "compute drift coefficient-of-variation tables"),
        ("probe", "windowed classification and PCA leakage probes"),
        ("curate", "select a minimally drift-affected subset"),
        ("audit", "run the full audit pipeline and verdict"),
        ("report", "summarize a previously written audit output directory"),
    ):
        p = sub.add_parser(name, help=help_text)
        _common_flags(p)
        if name == "probe":
            p.add_argument("--sensitivity", action="store_true",
                           help="also emit results with standardization flipped")

    args = parser.parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "ingest":
            return _cmd_ingest(cfg)
        if args.command == "synth":
            return _cmd_synth(cfg)
        if args.command == "audit-schedule":
            return _cmd_audit_schedule(cfg)
        if args.command == "drift-cv":
            return _cmd_drift_cv(cfg)
        if args.command == "probe":
            return _cmd_probe(cfg, args.sensitivity)
        if args.command == "curate":
            return _cmd_curate(cfg)
        if args.command == "audit":
            return _cmd_audit(cfg)
        if args.command == "report":
            return _cmd_report(cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except AuditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
