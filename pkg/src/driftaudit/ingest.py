"""Parsing raw trial recordings into a canonical, uniformly sampled,
resistance-domain dataset with a sorted manifest.

Canonical on-disk layout::

    <root>/manifest.csv          trial_id,path,recorded_at
    <root>/excluded.csv          path,reason        (only when non-empty)
    <root>/trials/<id>.csv       t_s,s1,...,sN      resistance in kOhm
    <root>/trials/<id>.meta      key=value metadata sidecar

All types are immutable after construction and safe to share read-only.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import (
    AdapterSpec,
    CANONICAL_ADAPTER,
    DEFAULT_LOAD_KOHM,
    DEFAULT_VREF_V,
    format_timestamp,
    parse_timestamp,
)
from .errors import (
    DegenerateSeries,
    EmptyDataset,
    EmptyTrial,
    IoFailure,
    MalformedPayload,
    OutOfRangeVoltage,
    UnknownColumn,
    UnparseableFilename,
)

MANIFEST_NAME = "manifest.csv"
EXCLUDED_NAME = "excluded.csv"
TRACE_NAME = "drift_trace.csv"
TRIALS_DIR = "trials"

_RESERVED = {MANIFEST_NAME, EXCLUDED_NAME, TRACE_NAME}


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SensorChannel:
    """One sensor column on a board."""

    column_index: int
    model_name: str = ""
    board_index: int = 1


@dataclass(frozen=True)
class TrialMeta:
    """Provenance and experimental parameters of a single trial."""

    trial_id: str
    gas_label: str
    concentration_ppm: float
    location_index: int
    board_index: int
    fan_speed_mps: float
    heater_voltage_v: float
    repetition: int
    recorded_at: datetime
    source_path: str = ""

    def __post_init__(self) -> None:
        if self.recorded_at.tzinfo is None:
            object.__setattr__(
                self, "recorded_at", self.recorded_at.replace(tzinfo=timezone.utc)
            )
        if self.recorded_at.timestamp() <= 0:
            raise MalformedPayload(f"{self.trial_id}: recorded_at not positive")
        if not self.concentration_ppm > 0:
            raise MalformedPayload(f"{self.trial_id}: concentration_ppm must be > 0")
        if self.location_index < 1 or self.board_index < 1:
            raise MalformedPayload(f"{self.trial_id}: location/board indices start at 1")
        if self.repetition < 1:
            raise MalformedPayload(f"{self.trial_id}: repetition starts at 1")

    @property
    def epoch_s(self) -> float:
        return self.recorded_at.timestamp()


@dataclass(frozen=True)
class TrialSeries:
    """One trial's uniformly sampled multi-sensor resistance matrix.

    ``values`` has shape (n_sensors, n_samples) in kOhm; the implied time grid
    is ``k / sample_rate_hz``. ``validity`` flags channels that are usable
    (not excluded, not saturated).
    """

    meta: TrialMeta
    sample_rate_hz: float
    t_release_s: float
    t_off_s: float
    duration_s: float
    sensors: tuple[SensorChannel, ...]
    values: np.ndarray
    validity: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        validity = np.asarray(self.validity, dtype=bool)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "validity", validity)
        tid = self.meta.trial_id
        if not (0 <= self.t_release_s < self.t_off_s <= self.duration_s):
            raise MalformedPayload(f"{tid}: need 0 <= t_release < t_off <= duration")
        n_expected = int(round(self.duration_s * self.sample_rate_hz))
        if values.ndim != 2 or values.shape != (len(self.sensors), n_expected):
            raise MalformedPayload(
                f"{tid}: values shape {values.shape} != "
                f"({len(self.sensors)}, {n_expected})"
            )
        if validity.shape != (len(self.sensors),):
            raise MalformedPayload(f"{tid}: validity mask shape mismatch")
        cols = [ch.column_index for ch in self.sensors]
        if len(set(cols)) != len(cols):
            raise MalformedPayload(f"{tid}: duplicate sensor column indices")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise MalformedPayload(f"{tid}: resistance values must be finite and >= 0")

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]

    @property
    def columns(self) -> tuple[int, ...]:
        return tuple(ch.column_index for ch in self.sensors)

    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) / self.sample_rate_hz

    def valid_columns(self) -> tuple[int, ...]:
        return tuple(
            ch.column_index for ch, ok in zip(self.sensors, self.validity) if ok
        )

    def channel_values(self, column_index: int) -> np.ndarray:
        for i, ch in enumerate(self.sensors):
            if ch.column_index == column_index:
                return self.values[i]
        raise UnknownColumn(f"{self.meta.trial_id}: no column {column_index}")


@dataclass(frozen=True)
class DatasetManifest:
    """Time-sorted index of all trials plus the files that were rejected."""

    trials: tuple[TrialMeta, ...]
    excluded: tuple[tuple[str, str], ...] = ()
    canonical_root: Path | None = None

    def __post_init__(self) -> None:
        keys = [(m.recorded_at, m.trial_id) for m in self.trials]
        if keys != sorted(keys):
            raise MalformedPayload("manifest not sorted by (recorded_at, trial_id)")
        ids = [m.trial_id for m in self.trials]
        if len(set(ids)) != len(ids):
            raise MalformedPayload("duplicate trial_id in manifest")

    def __len__(self) -> int:
        return len(self.trials)

    def timestamps_epoch(self) -> np.ndarray:
        return np.array([m.epoch_s for m in self.trials])


@dataclass(frozen=True)
class Dataset:
    """A manifest together with its loaded trials, in manifest order."""

    manifest: DatasetManifest
    trials: tuple[TrialSeries, ...]

    def __post_init__(self) -> None:
        if len(self.trials) != len(self.manifest):
            raise MalformedPayload("trial count differs from manifest")
        for meta, trial in zip(self.manifest.trials, self.trials):
            if trial.meta.trial_id != meta.trial_id:
                raise MalformedPayload("trial order differs from manifest")

    def __len__(self) -> int:
        return len(self.trials)

    def labels(self) -> list[str]:
        return [t.meta.gas_label for t in self.trials]

    def trial_ids(self) -> list[str]:
        return [t.meta.trial_id for t in self.trials]

    def common_valid_columns(self) -> tuple[int, ...]:
        """Sensor columns valid in every trial of the dataset."""
        common: set[int] | None = None
        for t in self.trials:
            cols = set(t.valid_columns())
            common = cols if common is None else common & cols
        return tuple(sorted(common or ()))


# ---------------------------------------------------------------------------
# Scalar conversions
# ---------------------------------------------------------------------------

def voltage_to_resistance(
    v: float, *, load_kohm: float = DEFAULT_LOAD_KOHM, vref_v: float = DEFAULT_VREF_V
) -> float:
    """Convert a sensor voltage reading to resistance in kOhm.

    R = load * (vref - v) / v, defined on the open interval 0 < v < vref.
    Readings at or outside the rails signal a saturated or disconnected
    channel and raise OutOfRangeVoltage.
    """
    if not (0.0 < v < vref_v):
        raise OutOfRangeVoltage(f"voltage {v} outside (0, {vref_v})")
    return load_kohm * (vref_v - v) / v


def resistance_to_voltage(
    r_kohm: float, *, load_kohm: float = DEFAULT_LOAD_KOHM, vref_v: float = DEFAULT_VREF_V
) -> float:
    """Algebraic inverse of :func:`voltage_to_resistance`."""
    if r_kohm < 0:
        raise OutOfRangeVoltage(f"resistance {r_kohm} must be >= 0")
    return vref_v / (1.0 + r_kohm / load_kohm)


def resample_uniform(
    times: np.ndarray,
    values: np.ndarray,
    rate_hz: float,
    duration_s: float | None = None,
) -> np.ndarray:
    """Linearly interpolate a raw series onto the uniform grid k / rate_hz.

    The output has round(duration_s * rate_hz) samples. When duration_s is
    omitted it is inferred as ``times[-1] + 1/rate_hz``, i.e. the last raw
    sample becomes the last grid point. Grid points before the first or
    after the last raw sample hold the nearest edge value.
    """
    t = np.asarray(times, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if t.ndim != 1 or t.shape != v.shape or t.size < 2:
        raise DegenerateSeries("need >= 2 samples")
    if np.any(np.diff(t) <= 0):
        raise DegenerateSeries("time must be strictly increasing")
    if rate_hz <= 0:
        raise DegenerateSeries("rate_hz must be positive")
    if duration_s is None:
        duration_s = t[-1] + 1.0 / rate_hz
    n = int(round(duration_s * rate_hz))
    if n < 1:
        raise DegenerateSeries("duration shorter than one sample period")
    grid = np.arange(n) / rate_hz
    idx = np.searchsorted(t, grid, side="right") - 1
    lo = np.clip(idx, 0, t.size - 2)
    x0, x1 = t[lo], t[lo + 1]
    y0, y1 = v[lo], v[lo + 1]
    slope = (y1 - y0) / (x1 - x0)
    out = y0 + slope * (grid - x0)
    out = np.where(grid < t[0], v[0], out)
    out = np.where(grid >= t[-1], v[-1], out)
    return out


# ---------------------------------------------------------------------------
# Raw file parsing
# ---------------------------------------------------------------------------

_META_FIELDS = (
    "gas_label", "concentration_ppm", "location_index", "board_index",
    "fan_speed_mps", "heater_voltage_v", "repetition",
)

_GROUP_TO_FIELD = {
    "gas": "gas_label",
    "concentration": "concentration_ppm",
    "location": "location_index",
    "board": "board_index",
    "fan": "fan_speed_mps",
    "voltage": "heater_voltage_v",
    "repetition": "repetition",
}

_FIELD_TYPES = {
    "gas_label": str,
    "concentration_ppm": float,
    "location_index": int,
    "board_index": int,
    "fan_speed_mps": float,
    "heater_voltage_v": float,
    "repetition": int,
}


def _meta_from_filename(path: Path, adapter: AdapterSpec) -> TrialMeta:
    m = re.match(adapter.filename_pattern, path.name)
    if m is None:
        raise UnparseableFilename(f"{path.name!r} does not match adapter grammar")
    groups = m.groupdict()
    fields: dict = {}
    for group, fname in _GROUP_TO_FIELD.items():
        if groups.get(group) is not None:
            fields[fname] = _FIELD_TYPES[fname](groups[group])
    for fname in _META_FIELDS:
        if fname not in fields:
            if fname not in adapter.defaults:
                raise UnparseableFilename(
                    f"{path.name!r}: field {fname} neither captured nor defaulted"
                )
            fields[fname] = _FIELD_TYPES[fname](adapter.defaults[fname])
    if groups.get("timestamp") is None:
        raise UnparseableFilename(f"{path.name!r}: no timestamp captured")
    try:
        recorded_at = datetime.strptime(
            groups["timestamp"], adapter.timestamp_format
        ).replace(tzinfo=timezone.utc)
    except ValueError as exc:
        raise UnparseableFilename(f"{path.name!r}: bad timestamp: {exc}") from exc
    trial_id = groups.get("trial_id") or path.stem
    return TrialMeta(
        trial_id=trial_id, recorded_at=recorded_at, source_path=str(path), **fields
    )


def _read_sidecar(path: Path) -> dict[str, str]:
    sidecar = path.with_suffix(".meta")
    if not sidecar.exists():
        raise UnparseableFilename(f"missing metadata sidecar {sidecar.name!r}")
    out: dict[str, str] = {}
    for line in sidecar.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise MalformedPayload(f"{sidecar.name}: bad sidecar line {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _meta_from_sidecar(path: Path, side: dict[str, str]) -> TrialMeta:
    try:
        return TrialMeta(
            trial_id=side["trial_id"],
            gas_label=side["gas_label"],
            concentration_ppm=float(side["concentration_ppm"]),
            location_index=int(side["location_index"]),
            board_index=int(side["board_index"]),
            fan_speed_mps=float(side["fan_speed_mps"]),
            heater_voltage_v=float(side["heater_voltage_v"]),
            repetition=int(side["repetition"]),
            recorded_at=parse_timestamp(side["recorded_at"]),
            source_path=side.get("source_path", str(path)),
        )
    except KeyError as exc:
        raise MalformedPayload(f"{path.name}: sidecar missing key {exc}") from exc
    except ValueError as exc:
        raise MalformedPayload(f"{path.name}: bad sidecar value: {exc}") from exc


@dataclass(frozen=True)
class RawChannel:
    """Non-uniform (time, value) series for one sensor column."""

    column_index: int
    times: np.ndarray
    values: np.ndarray


def parse_trial_file(
    path: str | Path, adapter: AdapterSpec
) -> tuple[TrialMeta, list[RawChannel]]:
    """Parse one raw trial file into metadata plus per-column raw series.

    Metadata comes from the filename grammar (or the sidecar for canonical
    stores). The payload is a delimited text table with one time column and
    one column per sensor; blank cells are missing data points and are
    dropped per channel.
    """
    path = Path(path)
    if not path.is_file():
        raise IoFailure(f"no such file: {path}")
    side = _read_sidecar(path) if adapter.meta_source == "sidecar" else None
    meta = (
        _meta_from_sidecar(path, side)
        if side is not None
        else _meta_from_filename(path, adapter)
    )

    with path.open(newline="") as fh:
        rows = list(csv.reader(fh, delimiter=adapter.delimiter))
    header: list[str] | None = None
    if adapter.has_header:
        if not rows:
            raise EmptyTrial(f"{path.name}: no rows")
        header, rows = rows[0], rows[1:]
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise EmptyTrial(f"{path.name}: zero samples")

    n_cols = len(rows[0])
    if n_cols < 2:
        raise MalformedPayload(f"{path.name}: need a time column and >= 1 sensor")
    t_col = adapter.time_column
    payload_cols = [c for c in range(n_cols) if c != t_col]
    if adapter.sensor_columns:
        if len(adapter.sensor_columns) != len(payload_cols):
            raise MalformedPayload(
                f"{path.name}: adapter declares {len(adapter.sensor_columns)} "
                f"sensor columns, payload has {len(payload_cols)}"
            )
        col_indices = list(adapter.sensor_columns)
    elif header is not None and all(
        re.fullmatch(r"s\d+", header[c].strip()) for c in payload_cols
    ):
        col_indices = [int(header[c].strip()[1:]) for c in payload_cols]
    else:
        col_indices = list(range(1, len(payload_cols) + 1))

    times: list[float] = []
    cells: list[list[float]] = []  # np.nan marks a blank cell
    for i, row in enumerate(rows):
        if len(row) != n_cols:
            raise MalformedPayload(
                f"{path.name}: row {i + 1} has {len(row)} cells, expected {n_cols}"
            )
        try:
            times.append(float(row[t_col]))
            cells.append(
                [float(row[c]) if row[c].strip() != "" else np.nan for c in payload_cols]
            )
        except ValueError:
            raise MalformedPayload(
                f"{path.name}: non-numeric cell in row {i + 1}"
            ) from None
    t_arr = np.asarray(times)
    table = np.asarray(cells)
    channels = []
    for j, col in enumerate(col_indices):
        keep = ~np.isnan(table[:, j])
        channels.append(RawChannel(col, t_arr[keep], table[:, j][keep]))
    return meta, channels


def canonicalize_trial(
    meta: TrialMeta,
    channels: Sequence[RawChannel],
    adapter: AdapterSpec,
    models: Sequence[str] = (),
) -> TrialSeries:
    """Convert raw channels to resistance and resample onto the uniform grid.

    Channels with saturated voltage samples or with fewer than 2 raw points
    are marked invalid and zero-filled rather than aborting the trial.
    """
    n = int(round(adapter.duration_s * adapter.rate_hz))
    values = np.zeros((len(channels), n))
    validity = np.ones(len(channels), dtype=bool)
    for i, ch in enumerate(channels):
        v = ch.values
        if adapter.units == "volts":
            if v.size and (np.any(v <= 0) or np.any(v >= adapter.vref_v)):
                validity[i] = False
                continue
            v = adapter.load_kohm * (adapter.vref_v - v) / v
        try:
            values[i] = resample_uniform(ch.times, v, adapter.rate_hz, adapter.duration_s)
        except DegenerateSeries:
            validity[i] = False
    validity[np.array([ch.column_index in adapter.exclude_columns for ch in channels])] = False
    sensors = tuple(
        SensorChannel(
            column_index=ch.column_index,
            model_name=models[i] if i < len(models) else "",
            board_index=meta.board_index,
        )
        for i, ch in enumerate(channels)
    )
    return TrialSeries(
        meta=meta,
        sample_rate_hz=adapter.rate_hz,
        t_release_s=adapter.t_release_s,
        t_off_s=adapter.t_off_s,
        duration_s=adapter.duration_s,
        sensors=sensors,
        values=values,
        validity=validity,
    )


# ---------------------------------------------------------------------------
# Channel exclusions
# ---------------------------------------------------------------------------

def apply_channel_exclusions(
    dataset: Dataset, excluded_columns: Iterable[int] = (1,)
) -> Dataset:
    """Clear the validity mask for the given columns across all trials.

    The default exclusion set {1} drops the chronically noisy first sensor.
    Returns a new dataset view; trial value matrices are shared.
    """
    excluded = set(int(c) for c in excluded_columns)
    if not excluded:
        return dataset
    known: set[int] = set()
    for t in dataset.trials:
        known.update(t.columns)
    unknown = excluded - known
    if unknown:
        raise UnknownColumn(f"columns {sorted(unknown)} not present in any trial")
    new_trials = []
    for t in dataset.trials:
        mask = t.validity.copy()
        for i, ch in enumerate(t.sensors):
            if ch.column_index in excluded:
                mask[i] = False
        new_trials.append(replace(t, validity=mask))
    return Dataset(manifest=dataset.manifest, trials=tuple(new_trials))


# ---------------------------------------------------------------------------
# Canonical store I/O
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    """Shortest decimal string that round-trips the float exactly."""
    return repr(float(x))


def write_trial(series: TrialSeries, root: str | Path) -> str:
    """Write one trial (payload CSV + metadata sidecar); returns the relative
    payload path."""
    root = Path(root)
    tdir = root / TRIALS_DIR
    tdir.mkdir(parents=True, exist_ok=True)
    rel = f"{TRIALS_DIR}/{series.meta.trial_id}.csv"
    csv_path = root / rel
    times = series.times()
    try:
        with csv_path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_s"] + [f"s{c}" for c in series.columns])
            for k in range(series.n_samples):
                w.writerow([_fmt(times[k])] + [_fmt(x) for x in series.values[:, k]])
        meta = series.meta
        lines = [
            f"trial_id={meta.trial_id}",
            f"gas_label={meta.gas_label}",
            f"concentration_ppm={_fmt(meta.concentration_ppm)}",
            f"location_index={meta.location_index}",
            f"board_index={meta.board_index}",
            f"fan_speed_mps={_fmt(meta.fan_speed_mps)}",
            f"heater_voltage_v={_fmt(meta.heater_voltage_v)}",
            f"repetition={meta.repetition}",
            f"recorded_at={format_timestamp(meta.recorded_at)}",
            f"sample_rate_hz={_fmt(series.sample_rate_hz)}",
            f"t_release_s={_fmt(series.t_release_s)}",
            f"t_off_s={_fmt(series.t_off_s)}",
            f"duration_s={_fmt(series.duration_s)}",
            f"source_path={meta.source_path}",
            "sensor_columns=" + ",".join(str(c) for c in series.columns),
            # pipe-separated: model names may contain commas
            "sensor_models=" + "|".join(ch.model_name for ch in series.sensors),
            "validity=" + ",".join("1" if ok else "0" for ok in series.validity),
        ]
        (root / rel).with_suffix(".meta").write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write trial {series.meta.trial_id}: {exc}") from exc
    return rel


def read_trial(csv_path: str | Path) -> TrialSeries:
    """Read one canonical trial (payload + sidecar) back into memory."""
    csv_path = Path(csv_path)
    side = _read_sidecar(csv_path)
    meta = _meta_from_sidecar(csv_path, side)
    try:
        rate = float(side["sample_rate_hz"])
        t_release = float(side["t_release_s"])
        t_off = float(side["t_off_s"])
        duration = float(side["duration_s"])
        columns = [int(c) for c in side["sensor_columns"].split(",")]
        models = side.get("sensor_models", "").split("|")
        validity = [c == "1" for c in side["validity"].split(",")]
    except (KeyError, ValueError) as exc:
        raise MalformedPayload(f"{csv_path.name}: bad sidecar: {exc}") from exc

    with csv_path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise EmptyTrial(f"{csv_path.name}: zero samples")
    header, rows = rows[0], rows[1:]
    if header[:1] != ["t_s"] or len(header) != len(columns) + 1:
        raise MalformedPayload(f"{csv_path.name}: header does not match sidecar")
    values = np.empty((len(columns), len(rows)))
    for k, row in enumerate(rows):
        if len(row) != len(columns) + 1:
            raise MalformedPayload(f"{csv_path.name}: row {k + 1} column count")
        try:
            values[:, k] = [float(x) for x in row[1:]]
        except ValueError:
            raise MalformedPayload(
                f"{csv_path.name}: non-numeric cell in row {k + 1}"
            ) from None
    sensors = tuple(
        SensorChannel(column_index=c, model_name=models[i] if i < len(models) else "",
                      board_index=meta.board_index)
        for i, c in enumerate(columns)
    )
    return TrialSeries(
        meta=meta, sample_rate_hz=rate, t_release_s=t_release, t_off_s=t_off,
        duration_s=duration, sensors=sensors, values=values,
        validity=np.asarray(validity, dtype=bool),
    )


def write_manifest(manifest: DatasetManifest, root: str | Path,
                   rel_paths: dict[str, str] | None = None) -> None:
    """Write manifest.csv (and excluded.csv when needed) under root."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    try:
        with (root / MANIFEST_NAME).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trial_id", "path", "recorded_at"])
            for m in manifest.trials:
                rel = (rel_paths or {}).get(m.trial_id, f"{TRIALS_DIR}/{m.trial_id}.csv")
                w.writerow([m.trial_id, rel, format_timestamp(m.recorded_at)])
        if manifest.excluded:
            with (root / EXCLUDED_NAME).open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["path", "reason"])
                for path, reason in manifest.excluded:
                    w.writerow([path, reason])
    except OSError as exc:
        raise IoFailure(f"cannot write manifest under {root}: {exc}") from exc


def write_dataset(dataset: Dataset, root: str | Path) -> None:
    """Write a full canonical store (all trials plus manifest)."""
    rel_paths = {}
    for trial in dataset.trials:
        rel_paths[trial.meta.trial_id] = write_trial(trial, root)
    manifest = replace(dataset.manifest, canonical_root=Path(root))
    write_manifest(manifest, root, rel_paths)


def load_dataset(root: str | Path) -> Dataset:
    """Load a canonical store written by :func:`write_dataset`."""
    root = Path(root)
    mpath = root / MANIFEST_NAME
    if not mpath.is_file():
        raise EmptyDataset(f"no manifest at {mpath}")
    with mpath.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise EmptyDataset(f"{mpath}: empty manifest")
    trials = []
    for trial_id, rel, _recorded in rows[1:]:
        trials.append(read_trial(root / rel))
    excluded: list[tuple[str, str]] = []
    epath = root / EXCLUDED_NAME
    if epath.is_file():
        with epath.open(newline="") as fh:
            erows = list(csv.reader(fh))
        excluded = [(r[0], r[1]) for r in erows[1:]]
    manifest = DatasetManifest(
        trials=tuple(t.meta for t in trials),
        excluded=tuple(excluded),
        canonical_root=root,
    )
    return Dataset(manifest=manifest, trials=tuple(trials))


# ---------------------------------------------------------------------------
# Manifest construction from a directory of files
# ---------------------------------------------------------------------------

def _candidate_files(root: Path) -> list[Path]:
    files = [
        p for p in sorted(root.rglob("*"))
        if p.is_file() and p.name not in _RESERVED and p.suffix != ".meta"
    ]
    return files


def build_manifest(root: str | Path, adapter: AdapterSpec = CANONICAL_ADAPTER) -> DatasetManifest:
    """Index every parseable trial under root, sorted by recording time.

    Unparseable files are listed in ``excluded`` with reasons; the result is
    deterministic for identical directory contents regardless of filesystem
    enumeration order.
    """
    root = Path(root)
    if not root.is_dir():
        raise EmptyDataset(f"not a directory: {root}")
    metas: list[TrialMeta] = []
    excluded: list[tuple[str, str]] = []
    seen_ids: dict[str, str] = {}
    for path in _candidate_files(root):
        rel = str(path.relative_to(root))
        try:
            meta, _channels = parse_trial_file(path, adapter)
        except (UnparseableFilename, MalformedPayload, EmptyTrial, IoFailure) as exc:
            excluded.append((rel, f"{type(exc).__name__}: {exc}"))
            continue
        if meta.trial_id in seen_ids:
            excluded.append((rel, f"duplicate trial_id {meta.trial_id!r} "
                                  f"(first seen in {seen_ids[meta.trial_id]})"))
            continue
        seen_ids[meta.trial_id] = rel
        metas.append(meta)
    if not metas:
        raise EmptyDataset(f"no parseable trials under {root}")
    metas.sort(key=lambda m: (m.recorded_at, m.trial_id))
    return DatasetManifest(trials=tuple(metas), excluded=tuple(excluded),
                           canonical_root=root)


def ingest_dataset(
    raw_root: str | Path, adapter: AdapterSpec, out_root: str | Path
) -> Dataset:
    """Full raw-to-canonical conversion: parse, convert, resample, write."""
    manifest = build_manifest(raw_root, adapter)
    raw_root = Path(raw_root)
    trials = []
    for meta in manifest.trials:
        _, channels = parse_trial_file(Path(meta.source_path), adapter)
        trials.append(canonicalize_trial(meta, channels, adapter))
    dataset = Dataset(manifest=manifest, trials=tuple(trials))
    write_dataset(dataset, out_root)
    return load_dataset(out_root)
