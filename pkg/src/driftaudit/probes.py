"""Leakage probes: windowed feature extraction, zero-offset compensation,
global PCA snapshots, and windowed linear-SVM classification with repeated
stratified splits.

The probe question is: can gas identity be predicted from a short window of
sensor readings, in particular from windows *before* the gas is released?
Accuracy well above chance on pre-release windows means the labels leak
through drift-correlated baseline state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    InsufficientClassTrials,
    LayoutMismatch,
    NoValidSamples,
    WindowOutOfRange,
)
from .ingest import Dataset
from .pca import PcaModel, pca_fit, pca_project
from .svm import DEFAULT_C, SvmModel, svm_train

DEFAULT_WINDOW_WIDTH_S = 0.1
DEFAULT_WINDOW_STARTS_S = tuple(float(s) for s in range(0, 65, 5))
DEFAULT_N_REPEATS = 10
DEFAULT_TRAIN_FRAC = 0.8


@dataclass(frozen=True)
class WindowSpec:
    """A grid of analysis windows: common width, several start times."""

    width_s: float = DEFAULT_WINDOW_WIDTH_S
    start_times_s: tuple[float, ...] = DEFAULT_WINDOW_STARTS_S

    def __post_init__(self) -> None:
        if self.width_s <= 0:
            raise WindowOutOfRange("window width must be positive")
        if not self.start_times_s:
            raise WindowOutOfRange("need at least one window start")
        if any(s < 0 for s in self.start_times_s):
            raise WindowOutOfRange("window starts must be >= 0")


@dataclass(frozen=True)
class FeatureMatrix:
    """Per-trial features from one window, with provenance and layout.

    ``layout`` maps each sensor column to its half-open span of feature
    columns, e.g. ``((2, (0, 1)), (3, (1, 2)))`` for mean-mode features of
    sensors 2 and 3.
    """

    X: np.ndarray
    y: tuple[str, ...]
    trial_ids: tuple[str, ...]
    window_start_s: float
    width_s: float
    mode: str
    compensated: bool
    layout: tuple[tuple[int, tuple[int, int]], ...]

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.X)):
            raise LayoutMismatch("feature matrix contains non-finite entries")

    def same_layout(self, other: "FeatureMatrix") -> bool:
        return (
            self.trial_ids == other.trial_ids
            and self.layout == other.layout
            and self.mode == other.mode
            and self.X.shape == other.X.shape
        )


def _window_slice(dataset: Dataset, start_s: float, width_s: float) -> tuple[int, int]:
    rates = {t.sample_rate_hz for t in dataset.trials}
    durations = {t.duration_s for t in dataset.trials}
    if len(rates) != 1 or len(durations) != 1:
        raise LayoutMismatch("trials have mixed sample rates or durations")
    rate = rates.pop()
    n_samples = dataset.trials[0].n_samples
    start_idx = int(round(start_s * rate))
    n_win = max(1, int(round(width_s * rate)))
    if start_idx < 0 or start_idx + n_win > n_samples:
        raise WindowOutOfRange(
            f"window [{start_s}, {start_s + width_s}) s outside the trial grid"
        )
    return start_idx, n_win


def window_features(
    dataset: Dataset, window: WindowSpec, mode: str = "mean"
) -> list[FeatureMatrix]:
    """Extract one feature matrix per window start.

    ``mean`` mode yields one feature per valid sensor (window-mean
    resistance); ``raw`` mode concatenates every sample in the window per
    sensor. Only sensors valid in every trial are used.
    """
    if mode not in ("mean", "raw"):
        raise ValueError(f"mode must be 'mean' or 'raw', got {mode!r}")
    if len(dataset) == 0:
        raise NoValidSamples("empty dataset")
    cols = dataset.common_valid_columns()
    if not cols:
        raise NoValidSamples("no sensor column is valid in every trial")
    labels = tuple(dataset.labels())
    trial_ids = tuple(dataset.trial_ids())
    out = []
    for start_s in window.start_times_s:
        start_idx, n_win = _window_slice(dataset, start_s, window.width_s)
        per_sensor = 1 if mode == "mean" else n_win
        x = np.empty((len(dataset), len(cols) * per_sensor))
        for ti, trial in enumerate(dataset.trials):
            for j, col in enumerate(cols):
                seg = trial.channel_values(col)[start_idx:start_idx + n_win]
                if mode == "mean":
                    x[ti, j] = seg.mean()
                else:
                    x[ti, j * n_win:(j + 1) * n_win] = seg
        layout = tuple(
            (col, (j * per_sensor, (j + 1) * per_sensor)) for j, col in enumerate(cols)
        )
        out.append(
            FeatureMatrix(
                X=x, y=labels, trial_ids=trial_ids, window_start_s=float(start_s),
                width_s=window.width_s, mode=mode, compensated=False, layout=layout,
            )
        )
    return out


def zero_offset_subtract(
    features: FeatureMatrix, reference: FeatureMatrix
) -> FeatureMatrix:
    """Subtract the reference window's features elementwise, per trial and
    per sensor, producing drift-compensated features."""
    if not features.same_layout(reference):
        raise LayoutMismatch("feature and reference matrices differ in rows or layout")
    return FeatureMatrix(
        X=features.X - reference.X,
        y=features.y,
        trial_ids=features.trial_ids,
        window_start_s=features.window_start_s,
        width_s=features.width_s,
        mode=features.mode,
        compensated=True,
        layout=features.layout,
    )


def chance_level(labels) -> float:
    """Accuracy of the majority-prior classifier: max class frequency."""
    labels = list(labels)
    if not labels:
        raise InsufficientClassTrials("no labels")
    _, counts = np.unique(np.asarray(labels, dtype=object), return_counts=True)
    return float(counts.max()) / len(labels)


# ---------------------------------------------------------------------------
# Standardization and splits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Standardizer:
    """Per-feature z-score fitted on training rows only."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        mean = x.mean(axis=0)
        sd = x.std(axis=0)
        return cls(mean=mean, scale=np.where(sd == 0.0, 1.0, sd))

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.scale


def stratified_split(
    labels, train_frac: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Random split preserving per-class proportions.

    Returns sorted (train_idx, test_idx); every class keeps at least one
    trial on each side.
    """
    labels = np.asarray(labels, dtype=object)
    train: list[int] = []
    test: list[int] = []
    for cls in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == cls)
        if idx.size < 2:
            raise InsufficientClassTrials(
                f"class {cls!r} has {idx.size} trial(s); need >= 2"
            )
        n_test = int(round(idx.size * (1.0 - train_frac)))
        n_test = min(max(n_test, 1), idx.size - 1)
        perm = rng.permutation(idx.size)
        test.extend(idx[perm[:n_test]].tolist())
        train.extend(idx[perm[n_test:]].tolist())
    return np.array(sorted(train)), np.array(sorted(test))


# ---------------------------------------------------------------------------
# Windowed classification probe
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AccuracyCurve:
    """Per-window classification accuracy, mean +- std across repeats."""

    window_starts_s: tuple[float, ...]
    width_s: float
    mean: np.ndarray
    std: np.ndarray
    per_repeat: np.ndarray  # (n_repeats, n_windows)
    n_repeats: int
    chance: float
    compensated: bool

    def rows(self) -> list[tuple[float, float, float, float]]:
        return [
            (s, float(self.mean[i]), float(self.std[i]), self.chance)
            for i, s in enumerate(self.window_starts_s)
        ]


def _compensate_all(
    features: list[FeatureMatrix], reference: FeatureMatrix
) -> list[FeatureMatrix]:
    return [zero_offset_subtract(f, reference) for f in features]


def extract_probe_features(
    dataset: Dataset,
    window: WindowSpec,
    mode: str = "mean",
    compensated: bool = False,
) -> list[FeatureMatrix]:
    """Window features for the grid, optionally zero-offset compensated
    against the trial-start window of the same width and mode."""
    feats = window_features(dataset, window, mode=mode)
    if not compensated:
        return feats
    ref = window_features(
        dataset, WindowSpec(width_s=window.width_s, start_times_s=(0.0,)), mode=mode
    )[0]
    return _compensate_all(feats, ref)


def windowed_accuracy(
    dataset: Dataset,
    window: WindowSpec,
    *,
    mode: str = "mean",
    compensated: bool = False,
    n_repeats: int = DEFAULT_N_REPEATS,
    train_frac: float = DEFAULT_TRAIN_FRAC,
    C: float = DEFAULT_C,
    seed: int = 0,
    standardize: bool = True,
    labels_override=None,
) -> tuple[AccuracyCurve, list[SvmModel]]:
    """Per-window SVM accuracy over repeated stratified splits.

    One split per repeat is shared across all windows, so the accuracy
    curve is paired over time. Standardization is fitted on the training
    rows only. Per-task seeds derive from (seed, repeat, window), so any
    execution order reproduces the sequential result. ``labels_override``
    substitutes the label vector (used by the label-shuffle null control).

    Returns the curve plus the models of the last repeat (one per window).
    """
    feats = extract_probe_features(dataset, window, mode=mode, compensated=compensated)
    labels = np.asarray(
        dataset.labels() if labels_override is None else list(labels_override),
        dtype=object,
    )
    if labels.shape[0] != len(dataset):
        raise InsufficientClassTrials("labels_override length mismatch")
    chance = chance_level(labels)
    n_windows = len(window.start_times_s)
    acc = np.zeros((n_repeats, n_windows))
    last_models: list[SvmModel] = []
    for r in range(n_repeats):
        split_rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([seed, r]))
        )
        train_idx, test_idx = stratified_split(labels, train_frac, split_rng)
        y_train = labels[train_idx]
        y_test = labels[test_idx]
        if r == n_repeats - 1:
            last_models = []
        for iw, fm in enumerate(feats):
            x_train, x_test = fm.X[train_idx], fm.X[test_idx]
            if standardize:
                scaler = Standardizer.fit(x_train)
                x_train = scaler.transform(x_train)
                x_test = scaler.transform(x_test)
            task_seed = int(
                np.random.SeedSequence([seed, r, iw]).generate_state(1, np.uint64)[0]
            )
            model = svm_train(x_train, y_train, C=C, seed=task_seed)
            acc[r, iw] = float(np.mean(model.predict(x_test) == y_test))
            if r == n_repeats - 1:
                last_models.append(model)
    curve = AccuracyCurve(
        window_starts_s=tuple(window.start_times_s),
        width_s=window.width_s,
        mean=acc.mean(axis=0),
        std=acc.std(axis=0),
        per_repeat=acc,
        n_repeats=n_repeats,
        chance=chance,
        compensated=compensated,
    )
    return curve, last_models


# ---------------------------------------------------------------------------
# Global PCA snapshots
# ---------------------------------------------------------------------------

def pca_snapshots(
    dataset: Dataset,
    window: WindowSpec,
    mode: str = "mean",
    compensated: bool = False,
    n_components: int = 2,
) -> tuple[PcaModel, list[np.ndarray]]:
    """Fit one global PCA on all trials pooled over all windows, then
    project each window's features into that shared space."""
    feats = extract_probe_features(dataset, window, mode=mode, compensated=compensated)
    pooled = np.vstack([f.X for f in feats])
    model = pca_fit(pooled)
    projections = [pca_project(model, f.X, n_components) for f in feats]
    return model, projections
