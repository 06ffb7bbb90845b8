"""driftaudit: detect drift-induced label leakage in multi-sensor gas
recording datasets.

The toolkit quantifies baseline drift, probes whether gas identity is
predictable from pre-exposure sensor readings, applies zero-offset drift
compensation, and curates minimally contaminated subsets. A built-in
synthetic generator with controllable drift provides ground truth for
validating every probe.
"""

from .config import AdapterSpec, load_config
from .curation import (
    SubsetSpec,
    auto_subset,
    rank_drift,
    reference_subset,
    restrict,
    temporal_proximity_groups,
)
from .driftmetrics import (
    BaselineStats,
    CvFilters,
    DriftCvRow,
    baseline_stats,
    cv_map,
    longterm_cv,
    shortterm_cv,
)
from .ingest import (
    Dataset,
    DatasetManifest,
    SensorChannel,
    TrialMeta,
    TrialSeries,
    apply_channel_exclusions,
    build_manifest,
    ingest_dataset,
    load_dataset,
    parse_trial_file,
    resample_uniform,
    voltage_to_resistance,
    write_dataset,
)
from .pca import PcaModel, pca_fit, pca_project
from .probes import (
    AccuracyCurve,
    FeatureMatrix,
    WindowSpec,
    chance_level,
    pca_snapshots,
    window_features,
    windowed_accuracy,
    zero_offset_subtract,
)
from .report import AuditVerdict, emit_plot_data, format_verdict, run_audit
from .schedule import detect_sessions, event_plot_data, schedule_stats
from .svm import SvmModel, svm_train
from .synth import (
    DriftTrace,
    SynthConfig,
    generate_dataset,
    generate_in_memory,
    generate_schedule,
    simulate_trial,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyCurve", "AdapterSpec", "AuditVerdict", "BaselineStats",
    "CvFilters", "Dataset", "DatasetManifest", "DriftCvRow", "DriftTrace",
    "FeatureMatrix", "PcaModel", "SensorChannel", "SubsetSpec", "SvmModel",
    "SynthConfig", "TrialMeta", "TrialSeries", "WindowSpec",
    "apply_channel_exclusions", "auto_subset", "baseline_stats",
    "build_manifest", "chance_level", "cv_map", "detect_sessions",
    "emit_plot_data", "event_plot_data", "format_verdict",
    "generate_dataset", "generate_in_memory", "generate_schedule",
    "ingest_dataset", "load_config", "load_dataset", "longterm_cv",
    "parse_trial_file", "pca_fit", "pca_project", "pca_snapshots",
    "rank_drift", "reference_subset", "resample_uniform", "restrict",
    "run_audit", "schedule_stats", "shortterm_cv", "simulate_trial",
    "svm_train", "temporal_proximity_groups", "voltage_to_resistance",
    "window_features", "windowed_accuracy", "write_dataset",
    "zero_offset_subtract",
]
