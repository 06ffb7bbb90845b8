"""Full-audit orchestration: run every stage, decide the leakage verdict,
and emit machine-readable artifacts.

Verdict rule: leakage is "present" when any pre-release window's mean probe
accuracy exceeds chance + k * std over repeats (k defaults to 3). Exit codes:
0 clean, 2 leakage detected, 1 error.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import AdapterSpec, format_timestamp
from .curation import SubsetSpec, auto_subset
from .driftmetrics import (
    BASELINE_WINDOW,
    CvFilters,
    DriftCvRow,
    baseline_stats,
    cv_map,
)
from .errors import ConfigError, IoFailure
from .ingest import Dataset, ingest_dataset, load_dataset
from .pca import PcaModel
from .probes import (
    AccuracyCurve,
    DEFAULT_N_REPEATS,
    DEFAULT_TRAIN_FRAC,
    WindowSpec,
    pca_snapshots,
    windowed_accuracy,
)
from .schedule import (
    DEFAULT_GAP_THRESHOLD_S,
    ScheduleReport,
    detect_sessions,
    event_plot_data,
    schedule_stats,
)
from .svm import DEFAULT_C

EXIT_CLEAN = 0
EXIT_ERROR = 1
EXIT_LEAKAGE = 2

DEFAULT_LEAKAGE_STD_MULTIPLIER = 3.0


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(x) for x in row])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def write_json(path: Path, obj) -> None:
    try:
        path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Verdict
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LeakageEvidence:
    """Numeric backing for one leakage decision."""

    status: str  # "present" | "none"
    windows: list[dict]
    chance: float
    std_multiplier: float

    def to_jsonable(self) -> dict:
        return {
            "status": self.status,
            "chance": self.chance,
            "std_multiplier": self.std_multiplier,
            "pre_release_windows": self.windows,
        }


@dataclass(frozen=True)
class AuditVerdict:
    """Machine-readable outcome of the full audit."""

    schedule_verdict: str
    longterm_leakage: LeakageEvidence
    residual_shortterm_leakage: LeakageEvidence
    recommended_subset: SubsetSpec | None
    best_practice_checks: list[dict]

    @property
    def exit_code(self) -> int:
        leaky = (
            self.longterm_leakage.status == "present"
            or self.residual_shortterm_leakage.status == "present"
        )
        return EXIT_LEAKAGE if leaky else EXIT_CLEAN

    def to_jsonable(self) -> dict:
        return {
            "schedule_verdict": self.schedule_verdict,
            "longterm_leakage": self.longterm_leakage.to_jsonable(),
            "residual_shortterm_leakage": self.residual_shortterm_leakage.to_jsonable(),
            "recommended_subset": (
                None if self.recommended_subset is None
                else self.recommended_subset.to_jsonable()
            ),
            "best_practice_checks": self.best_practice_checks,
            "exit_code": self.exit_code,
        }


def assess_leakage(
    curve: AccuracyCurve,
    t_release_s: float,
    std_multiplier: float = DEFAULT_LEAKAGE_STD_MULTIPLIER,
) -> LeakageEvidence:
    """Flag leakage when any fully pre-release window beats
    chance + multiplier * std. Windows straddling the release instant are
    not counted as pre-release."""
    windows = []
    present = False
    for i, start in enumerate(curve.window_starts_s):
        if start + curve.width_s > t_release_s + 1e-9:
            continue
        mean = float(curve.mean[i])
        std = float(curve.std[i])
        excess = mean - curve.chance
        flagged = mean > curve.chance + std_multiplier * std
        present = present or flagged
        windows.append(
            {
                "window_start_s": start,
                "mean_accuracy": mean,
                "std_accuracy": std,
                "excess_over_chance": excess,
                "flagged": flagged,
            }
        )
    return LeakageEvidence(
        status="present" if present else "none",
        windows=windows,
        chance=curve.chance,
        std_multiplier=std_multiplier,
    )


def best_practice_checks(
    schedule_report: ScheduleReport,
    dataset: Dataset,
    *,
    reference_gas_label: str | None = None,
    reference_max_gap_s: float | None = None,
    environment_metadata_recorded: bool | None = None,
) -> list[dict]:
    """Pass/fail the recording campaign against protocol best practices."""
    checks: list[dict] = []

    verdict = schedule_report.verdict
    checks.append(
        {
            "name": "randomized_presentation_order",
            "status": "pass" if verdict == "randomized-like" else "fail",
            "detail": f"schedule verdict is {verdict!r} "
                      f"(NMI={schedule_report.nmi:.3f}, "
                      f"purity={schedule_report.mean_purity:.3f})",
        }
    )

    if reference_gas_label is None:
        checks.append(
            {
                "name": "reference_gas_at_short_intervals",
                "status": "unknown",
                "detail": "no reference gas label configured",
            }
        )
    else:
        ts = sorted(
            m.epoch_s for m in dataset.manifest.trials
            if m.gas_label == reference_gas_label
        )
        limit = reference_max_gap_s or DEFAULT_GAP_THRESHOLD_S
        if len(ts) < 2:
            status, detail = "fail", (
                f"fewer than 2 trials of reference gas {reference_gas_label!r}"
            )
        else:
            span = dataset.manifest.timestamps_epoch()
            gaps = [ts[0] - float(span.min())] + [
                b - a for a, b in zip(ts, ts[1:])
            ] + [float(span.max()) - ts[-1]]
            worst = max(gaps)
            status = "pass" if worst <= limit else "fail"
            detail = f"largest interval without a reference trial: {worst:.0f} s"
        checks.append(
            {"name": "reference_gas_at_short_intervals", "status": status,
             "detail": detail}
        )

    if environment_metadata_recorded is None:
        env_status, env_detail = "unknown", (
            "ambient temperature/humidity channels are outside this data model; "
            "set audit.environment_metadata_recorded to assert them"
        )
    else:
        env_status = "pass" if environment_metadata_recorded else "fail"
        env_detail = "declared by configuration"
    checks.append(
        {"name": "environment_metadata_recorded", "status": env_status,
         "detail": env_detail}
    )

    checks.append(
        {
            "name": "exact_recording_times_present",
            "status": "pass",
            "detail": "every manifest entry carries a UTC timestamp",
        }
    )
    return checks


# ---------------------------------------------------------------------------
# Full pipeline
# ---------------------------------------------------------------------------

@dataclass
class AuditResults:
    """Everything the audit computed, ready for artifact emission."""

    dataset: Dataset
    schedule_report: ScheduleReport | None = None
    cv_sensor_rows: list[DriftCvRow] | None = None
    cv_location_rows: list[DriftCvRow] | None = None
    curve_raw: AccuracyCurve | None = None
    curve_compensated: AccuracyCurve | None = None
    curve_unstandardized: AccuracyCurve | None = None
    pca_model: PcaModel | None = None
    pca_projections: list[np.ndarray] | None = None
    pca_projections_compensated: list[np.ndarray] | None = None
    window: WindowSpec | None = None
    probe_meta: dict = field(default_factory=dict)
    subset: SubsetSpec | None = None
    verdict: AuditVerdict | None = None


def _exclude_trials(dataset: Dataset, rules: list[dict]) -> Dataset:
    """Drop trials matching dataset.exclude_trials rules (gas label plus an
    optional concentration), e.g. special-case runs with too few trials."""
    from .ingest import DatasetManifest

    def drop(meta) -> bool:
        for rule in rules:
            if meta.gas_label != rule.get("gas_label"):
                continue
            conc = rule.get("concentration_ppm")
            if conc is None or abs(meta.concentration_ppm - conc) < 1e-9:
                return True
        return False

    trials = tuple(t for t in dataset.trials if not drop(t.meta))
    if len(trials) == len(dataset.trials):
        return dataset
    if not trials:
        raise ConfigError("dataset.exclude_trials removed every trial")
    manifest = DatasetManifest(
        trials=tuple(t.meta for t in trials),
        excluded=dataset.manifest.excluded,
        canonical_root=dataset.manifest.canonical_root,
    )
    return Dataset(manifest=manifest, trials=trials)


def _resolve_dataset(config: dict, out_dir: Path) -> Dataset:
    ds_cfg = config.get("dataset", {})
    dataset = None
    if ds_cfg.get("root"):
        dataset = load_dataset(ds_cfg["root"])
    else:
        adapter_cfg = config.get("adapter", {})
        if adapter_cfg.get("root"):
            adapter = AdapterSpec.from_mapping(adapter_cfg)
            dataset = ingest_dataset(adapter_cfg["root"], adapter,
                                     out_dir / "canonical")
        elif config.get("synth"):
            from .synth import SynthConfig, generate_dataset

            synth_cfg = SynthConfig.from_mapping(config["synth"])
            dataset, _trace = generate_dataset(synth_cfg, out_dir / "synth_data")
    if dataset is None:
        raise ConfigError(
            "no dataset source: set dataset.root, adapter.root, or a synth section"
        )
    if ds_cfg.get("exclude_trials"):
        dataset = _exclude_trials(dataset, ds_cfg["exclude_trials"])
    return dataset


def window_spec_from_config(probe_cfg: dict) -> WindowSpec:
    kw = {}
    if "width_s" in probe_cfg:
        kw["width_s"] = float(probe_cfg["width_s"])
    if "start_times_s" in probe_cfg:
        kw["start_times_s"] = tuple(float(s) for s in probe_cfg["start_times_s"])
    return WindowSpec(**kw)


def run_audit(
    config: dict, out_dir: str | Path, write_artifacts: bool = True
) -> tuple[AuditVerdict, AuditResults]:
    """Run ingest -> schedule audit -> drift metrics -> probes (raw and
    compensated) -> curation, decide the verdict, and write every module
    output plus audit_verdict.json under ``out_dir``.

    Deterministic for a fixed (config, seed, dataset). Exit-code convention
    for callers: 0 clean, 2 leakage detected (``verdict.exit_code``),
    1 error (any raised AuditError).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = _resolve_dataset(config, out_dir)
    results = AuditResults(dataset=dataset)

    audit_cfg = config.get("audit", {})
    probe_cfg = config.get("probe", {})
    seed = int(config.get("seed", probe_cfg.get("seed", 0)))

    # schedule
    gap = float(audit_cfg.get("gap_threshold_s", DEFAULT_GAP_THRESHOLD_S))
    sessions = detect_sessions(dataset.manifest, gap)
    thr = {
        k: float(audit_cfg[k])
        for k in ("nmi_batched", "purity_batched", "nmi_randomized")
        if k in audit_cfg
    }
    results.schedule_report = schedule_stats(sessions, dataset.labels(), **thr)

    # drift metrics
    filters = None
    if "cv_filters" in audit_cfg:
        f = audit_cfg["cv_filters"]
        filters = CvFilters(
            fan_speed_mps=f.get("fan_speed_mps"),
            heater_voltage_v=f.get("heater_voltage_v"),
            gases=frozenset(f["gases"]) if f.get("gases") else None,
        )
    results.cv_sensor_rows = cv_map(dataset, "sensor_column", filters)
    results.cv_location_rows = cv_map(dataset, "location_board", filters)

    # probes
    window = window_spec_from_config(probe_cfg)
    results.window = window
    mode = probe_cfg.get("mode", "mean")
    n_repeats = int(probe_cfg.get("n_repeats", DEFAULT_N_REPEATS))
    train_frac = float(probe_cfg.get("train_frac", DEFAULT_TRAIN_FRAC))
    c_value = float(probe_cfg.get("C", DEFAULT_C))
    standardize = bool(probe_cfg.get("standardize", True))
    curve_raw, models_raw = windowed_accuracy(
        dataset, window, mode=mode, compensated=False, n_repeats=n_repeats,
        train_frac=train_frac, C=c_value, seed=seed, standardize=standardize,
    )
    curve_comp, _ = windowed_accuracy(
        dataset, window, mode=mode, compensated=True, n_repeats=n_repeats,
        train_frac=train_frac, C=c_value, seed=seed, standardize=standardize,
    )
    results.curve_raw = curve_raw
    results.curve_compensated = curve_comp
    if probe_cfg.get("sensitivity"):
        results.curve_unstandardized, _ = windowed_accuracy(
            dataset, window, mode=mode, compensated=False, n_repeats=n_repeats,
            train_frac=train_frac, C=c_value, seed=seed,
            standardize=not standardize,
        )
    results.pca_model, results.pca_projections = pca_snapshots(
        dataset, window, mode=mode, compensated=False
    )
    _, results.pca_projections_compensated = pca_snapshots(
        dataset, window, mode=mode, compensated=True
    )
    results.probe_meta = {
        "feature_mode": mode,
        "standardized": standardize,
        "baseline_window": BASELINE_WINDOW,
        "window_width_s": window.width_s,
        "window_starts_s": list(window.start_times_s),
        "n_repeats": n_repeats,
        "train_frac": train_frac,
        "C": c_value,
        "seed": seed,
        "solver": {
            "max_epochs_used": max((max(m.epochs) for m in models_raw), default=0),
            "max_duality_gap": max((max(m.gaps) for m in models_raw), default=0.0),
        },
    }

    # curation
    results.subset = auto_subset(
        dataset,
        gap_threshold_s=gap,
        max_span_s=float(audit_cfg.get("max_span_s", 14 * 86400.0)),
        drop_worst_sensors=int(audit_cfg.get("drop_worst_sensors", 1)),
        filters=filters,
    )

    # verdict
    t_release = dataset.trials[0].t_release_s
    mult = float(audit_cfg.get("leakage_std_multiplier",
                               DEFAULT_LEAKAGE_STD_MULTIPLIER))
    verdict = AuditVerdict(
        schedule_verdict=results.schedule_report.verdict,
        longterm_leakage=assess_leakage(curve_raw, t_release, mult),
        residual_shortterm_leakage=assess_leakage(curve_comp, t_release, mult),
        recommended_subset=results.subset,
        best_practice_checks=best_practice_checks(
            results.schedule_report,
            dataset,
            reference_gas_label=audit_cfg.get("reference_gas_label"),
            reference_max_gap_s=audit_cfg.get("reference_max_gap_s"),
            environment_metadata_recorded=audit_cfg.get(
                "environment_metadata_recorded"
            ),
        ),
    )
    results.verdict = verdict
    if write_artifacts:
        emit_plot_data(results, out_dir)
        write_verdict(verdict, out_dir)
    return verdict, results


# ---------------------------------------------------------------------------
# Artifact emission
# ---------------------------------------------------------------------------

def _accuracy_rows(curve: AccuracyCurve) -> list[list]:
    return [
        [start, mean, std, chance] for start, mean, std, chance in curve.rows()
    ]


def emit_plot_data(results: AuditResults, out_dir: str | Path) -> dict:
    """Write every plot-ready CSV the results support; returns the artifact
    manifest with any omissions and writes it as report_manifest.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    emitted: list[str] = []
    omitted: list[dict] = []

    def emit(name: str, fn) -> None:
        fn()
        emitted.append(name)

    dataset = results.dataset

    rows = []
    for gas, conc, stamps in event_plot_data(dataset.manifest):
        for ts in stamps:
            rows.append([gas, conc, ts])
    emit("event_plot.csv", lambda: _write_csv(
        out_dir / "event_plot.csv",
        ["gas_label", "concentration_ppm", "recorded_at_epoch_s"], rows))

    timeline = []
    for trial in dataset.trials:
        for st in baseline_stats(trial):
            timeline.append(
                [trial.meta.trial_id, format_timestamp(trial.meta.recorded_at),
                 st.column_index, st.mu_kohm]
            )
    emit("baseline_timeline.csv", lambda: _write_csv(
        out_dir / "baseline_timeline.csv",
        ["trial_id", "recorded_at", "sensor_column", "baseline_mean_kohm"],
        timeline))

    for name, rows_attr in (
        ("cv_longterm.csv", "cv_longterm"), ("cv_shortterm.csv", "cv_shortterm"),
    ):
        if results.cv_sensor_rows is None or results.cv_location_rows is None:
            omitted.append({"file": name, "reason": "drift metrics stage not run"})
            continue
        cv_rows = []
        for r in results.cv_location_rows + results.cv_sensor_rows:
            cv_rows.append(
                [r.group_by,
                 "" if r.location_index is None else r.location_index,
                 "" if r.board_index is None else r.board_index,
                 "" if r.column_index is None else r.column_index,
                 getattr(r, rows_attr), r.n_trials]
            )
        emit(name, lambda n=name, cr=cv_rows: _write_csv(
            out_dir / n,
            ["group_by", "location_index", "board_index", "sensor_column",
             "cv", "n_trials"], cr))

    if results.curve_raw is None:
        omitted.append({"file": "accuracy_curve.csv", "reason": "probe stage not run"})
    else:
        emit("accuracy_curve.csv", lambda: _write_csv(
            out_dir / "accuracy_curve.csv",
            ["window_start_s", "mean_accuracy", "std_accuracy", "chance"],
            _accuracy_rows(results.curve_raw)))
        if results.curve_compensated is not None:
            emit("accuracy_curve_compensated.csv", lambda: _write_csv(
                out_dir / "accuracy_curve_compensated.csv",
                ["window_start_s", "mean_accuracy", "std_accuracy", "chance"],
                _accuracy_rows(results.curve_compensated)))
        if results.curve_unstandardized is not None:
            emit("accuracy_curve_unstandardized.csv", lambda: _write_csv(
                out_dir / "accuracy_curve_unstandardized.csv",
                ["window_start_s", "mean_accuracy", "std_accuracy", "chance"],
                _accuracy_rows(results.curve_unstandardized)))

    for name, projections in (
        ("pca_projection.csv", results.pca_projections),
        ("pca_projection_compensated.csv", results.pca_projections_compensated),
    ):
        if projections is None or results.window is None:
            omitted.append({"file": name, "reason": "probe stage not run"})
            continue
        prows = []
        ids = results.dataset.trial_ids()
        labels = results.dataset.labels()
        for start, proj in zip(results.window.start_times_s, projections):
            for i, tid in enumerate(ids):
                pc1 = float(proj[i, 0]) if proj.shape[1] > 0 else 0.0
                pc2 = float(proj[i, 1]) if proj.shape[1] > 1 else 0.0
                prows.append([tid, start, pc1, pc2, labels[i]])
        emit(name, lambda n=name, pr=prows: _write_csv(
            out_dir / n,
            ["trial_id", "window_start_s", "pc1", "pc2", "gas"], pr))

    if results.probe_meta:
        emit("probe_report.json", lambda: write_json(
            out_dir / "probe_report.json", results.probe_meta))
    else:
        omitted.append({"file": "probe_report.json", "reason": "probe stage not run"})

    if results.schedule_report is not None:
        emit("schedule_report.json", lambda: write_json(
            out_dir / "schedule_report.json", results.schedule_report.to_jsonable()))
    else:
        omitted.append({"file": "schedule_report.json",
                        "reason": "schedule stage not run"})

    if results.cv_sensor_rows is not None:
        emit("drift_report.json", lambda: write_json(
            out_dir / "drift_report.json",
            {"baseline_window": BASELINE_WINDOW,
             "n_sensor_groups": len(results.cv_sensor_rows),
             "n_location_board_groups": len(results.cv_location_rows or [])}))

    if results.subset is not None:
        emit("subset_spec.json", lambda: write_json(
            out_dir / "subset_spec.json", results.subset.to_jsonable()))
    else:
        omitted.append({"file": "subset_spec.json", "reason": "curation stage not run"})

    manifest = {"emitted": sorted(emitted), "omitted": omitted}
    write_json(out_dir / "report_manifest.json", manifest)
    return manifest


def write_verdict(verdict: AuditVerdict, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "audit_verdict.json"
    write_json(path, verdict.to_jsonable())
    return path


def format_verdict(verdict: AuditVerdict) -> str:
    """Human-readable one-screen audit summary."""
    lines = [
        "dataset audit verdict",
        "=" * 40,
        f"schedule:                 {verdict.schedule_verdict}",
        f"long-term leakage:        {verdict.longterm_leakage.status}",
        f"residual short-term:      {verdict.residual_shortterm_leakage.status}",
    ]
    for w in verdict.longterm_leakage.windows:
        lines.append(
            f"  raw  t={w['window_start_s']:>6.1f}s  acc={w['mean_accuracy']:.3f} "
            f"(chance {verdict.longterm_leakage.chance:.3f})"
            f"{'  <-- leak' if w['flagged'] else ''}"
        )
    for w in verdict.residual_shortterm_leakage.windows:
        lines.append(
            f"  comp t={w['window_start_s']:>6.1f}s  acc={w['mean_accuracy']:.3f} "
            f"(chance {verdict.residual_shortterm_leakage.chance:.3f})"
            f"{'  <-- leak' if w['flagged'] else ''}"
        )
    if verdict.recommended_subset is not None:
        s = verdict.recommended_subset
        lines.append(
            f"recommended subset:       gases={sorted(s.gases)} "
            f"location={s.location_index} board={s.board_index} "
            f"sensors={sorted(s.sensor_columns)}"
        )
    lines.append("best-practice checks:")
    for c in verdict.best_practice_checks:
        lines.append(f"  [{c['status']:>7}] {c['name']}: {c['detail']}")
    lines.append(f"exit code: {verdict.exit_code}")
    return "\n".join(lines)
