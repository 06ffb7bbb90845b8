"""Synthetic multi-sensor dataset generator with controllable drift.

The sensor model is additive: per sensor s in a trial with gas g,

    R(t) = B[s] + m[s] * t + A[g][s] * g(t) + eps(t)

where B is the session baseline (a per-session random walk), m a per-trial
short-term drift slope, g(t) a first-order rise/decay response between gas
release and shut-off, and eps i.i.d. Gaussian noise. The ground-truth drift
state of every generated trial is recorded so audit probes can be validated
against a known answer.

Random streams are split hierarchically (dataset -> trial -> sensor) so trial
simulation is order-independent and deterministic for a fixed seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, fields as dataclass_fields
from datetime import datetime
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .config import epoch_to_timestamp
from .errors import ConfigError, IoFailure
from .ingest import (
    Dataset,
    DatasetManifest,
    SensorChannel,
    TRACE_NAME,
    TrialMeta,
    TrialSeries,
    write_dataset,
)

logger = logging.getLogger(__name__)

SCHEDULE_MODES = ("batched", "randomized", "interleaved")

# stream tags for hierarchical seeding
_STREAM_SCHEDULE = 1
_STREAM_SESSION_STEPS = 2
_STREAM_TRIAL = 3


def _per_board_sensor(value, n_boards: int, n_sensors: int, name: str) -> np.ndarray:
    """Broadcast a scalar / per-sensor vector / (board, sensor) matrix."""
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        return np.full((n_boards, n_sensors), float(arr))
    if arr.shape == (n_sensors,):
        return np.tile(arr, (n_boards, 1))
    if arr.shape == (n_boards, n_sensors):
        return arr.copy()
    raise ConfigError(
        f"{name}: expected scalar, ({n_sensors},) or ({n_boards},{n_sensors}), "
        f"got shape {arr.shape}"
    )


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of a generated dataset.

    ``gases`` maps each label to its response amplitude in kOhm: a scalar or
    a per-sensor vector. Sigma parameters accept a scalar, a per-sensor
    vector, or a (board, sensor) matrix, so drift can be concentrated on one
    sensor or one board.
    """

    gases: Mapping[str, float | Sequence[float]]
    trials_per_gas: int = 5
    n_boards: int = 1
    n_sensors_per_board: int = 4
    schedule_mode: str = "batched"
    trials_per_session: int | None = None   # randomized/interleaved block size
    inter_trial_gap_s: float = 300.0
    inter_session_gap_s: float = 7 * 86400.0
    baseline_mean0: float | Sequence[float] = 50.0
    longterm_step_sigma: float | Sequence[float] = 0.0
    shortterm_slope_sigma: float | Sequence[float] = 0.0
    couple_shortterm_to_gas: bool = False
    gas_slope_offsets: Mapping[str, float] | None = None
    noise_sigma: float | Sequence[float] = 0.0
    response_tau_s: float = 5.0
    t_release_s: float = 20.0
    t_off_s: float = 200.0
    duration_s: float = 260.0
    rate_hz: float = 100.0
    seed: int = 0
    start_epoch_s: float = 1_577_836_800.0  # 2020-01-01T00:00:00Z
    location_index: int = 4
    fan_speed_mps: float = 0.21
    heater_voltage_v: float = 6.0
    concentration_ppm: float | Mapping[str, float] = 100.0

    def __post_init__(self) -> None:
        if not self.gases:
            raise ConfigError("need at least one gas")
        if self.trials_per_gas < 1:
            raise ConfigError("trials_per_gas must be >= 1")
        if self.n_boards < 1 or self.n_sensors_per_board < 1:
            raise ConfigError("n_boards and n_sensors_per_board must be >= 1")
        if self.schedule_mode not in SCHEDULE_MODES:
            raise ConfigError(f"schedule_mode must be one of {SCHEDULE_MODES}")
        if self.trials_per_session is not None and self.trials_per_session < 1:
            raise ConfigError("trials_per_session must be >= 1")
        if not (self.inter_trial_gap_s > 0 and self.inter_session_gap_s > 0):
            raise ConfigError("schedule gaps must be positive")
        if not (0 <= self.t_release_s < self.t_off_s <= self.duration_s):
            raise ConfigError("need 0 <= t_release < t_off <= duration")
        if self.rate_hz <= 0 or self.response_tau_s <= 0:
            raise ConfigError("rate_hz and response_tau_s must be positive")
        for name in ("longterm_step_sigma", "shortterm_slope_sigma", "noise_sigma"):
            arr = self._bs(getattr(self, name), name)
            if np.any(arr < 0):
                raise ConfigError(f"{name} must be >= 0")
        if np.any(self._bs(self.baseline_mean0, "baseline_mean0") < 0):
            raise ConfigError("baseline_mean0 must be >= 0")
        for gas in self.gases:
            self.amplitude(gas)  # shape check
        if self.couple_shortterm_to_gas and self.gas_slope_offsets is None:
            if float(np.mean(self._bs(self.shortterm_slope_sigma, "s"))) <= 0:
                raise ConfigError(
                    "couple_shortterm_to_gas needs gas_slope_offsets or a "
                    "positive shortterm_slope_sigma to derive them from"
                )
        if self.gas_slope_offsets is not None:
            missing = set(self.gases) - set(self.gas_slope_offsets)
            if missing:
                raise ConfigError(f"gas_slope_offsets missing gases: {sorted(missing)}")

    def _bs(self, value, name: str) -> np.ndarray:
        return _per_board_sensor(value, self.n_boards, self.n_sensors_per_board, name)

    @property
    def gas_labels(self) -> tuple[str, ...]:
        return tuple(self.gases)

    @property
    def session_length(self) -> int:
        """Trials per session block. Batched sessions are always gas blocks."""
        if self.schedule_mode == "batched":
            return self.trials_per_gas
        return self.trials_per_session or self.trials_per_gas

    def amplitude(self, gas: str) -> np.ndarray:
        arr = np.asarray(self.gases[gas], dtype=np.float64)
        if arr.ndim == 0:
            return np.full(self.n_sensors_per_board, float(arr))
        if arr.shape == (self.n_sensors_per_board,):
            return arr.astype(np.float64)
        raise ConfigError(f"gas {gas!r}: amplitude must be scalar or per-sensor vector")

    def concentration(self, gas: str) -> float:
        if isinstance(self.concentration_ppm, Mapping):
            return float(self.concentration_ppm[gas])
        return float(self.concentration_ppm)

    def slope_offsets(self) -> dict[str, np.ndarray]:
        """Per-gas mean short-term slope vector, active when coupling is on.

        Offsets may be given per gas as a scalar or a per-sensor vector
        (short-term drift is sensor-specific in practice). Unless given
        explicitly, scalar offsets are derived, centered and spaced two
        slope sigmas apart.
        """
        ns = self.n_sensors_per_board
        if not self.couple_shortterm_to_gas:
            return {g: np.zeros(ns) for g in self.gases}
        if self.gas_slope_offsets is not None:
            out = {}
            for g in self.gases:
                v = np.asarray(self.gas_slope_offsets[g], dtype=np.float64)
                if v.ndim == 0:
                    v = np.full(ns, float(v))
                elif v.shape != (ns,):
                    raise ConfigError(
                        f"gas_slope_offsets[{g!r}]: scalar or ({ns},) vector"
                    )
                out[g] = v
            return out
        sigma = float(np.mean(self._bs(self.shortterm_slope_sigma, "s")))
        n = len(self.gases)
        return {
            g: np.full(ns, (i - (n - 1) / 2.0) * 2.0 * sigma)
            for i, g in enumerate(self.gases)
        }

    @classmethod
    def from_mapping(cls, m: Mapping) -> "SynthConfig":
        kw = dict(m)
        unknown = set(kw) - {f.name for f in dataclass_fields(cls)}
        if unknown:
            raise ConfigError(f"unknown synth keys: {sorted(unknown)}")
        return cls(**kw)


@dataclass(frozen=True)
class TraceEntry:
    """Ground truth for one (trial, sensor) pair."""

    trial_id: str
    column_index: int
    baseline_kohm: float
    slope_kohm_per_s: float
    session_id: int


@dataclass(frozen=True)
class DriftTrace:
    """Ground-truth drift state of a generated dataset."""

    entries: tuple[TraceEntry, ...]

    def session_of(self, trial_id: str) -> int:
        for e in self.entries:
            if e.trial_id == trial_id:
                return e.session_id
        raise KeyError(trial_id)

    def write_csv(self, path: str | Path) -> None:
        lines = ["trial_id,sensor,B_kohm,slope_kohm_per_s,session_id"]
        for e in self.entries:
            lines.append(
                f"{e.trial_id},{e.column_index},{e.baseline_kohm!r},"
                f"{e.slope_kohm_per_s!r},{e.session_id}"
            )
        try:
            Path(path).write_text("\n".join(lines) + "\n")
        except OSError as exc:
            raise IoFailure(f"cannot write trace: {exc}") from exc

    @classmethod
    def read_csv(cls, path: str | Path) -> "DriftTrace":
        lines = Path(path).read_text().splitlines()
        entries = []
        for line in lines[1:]:
            tid, col, b, m, sid = line.split(",")
            entries.append(TraceEntry(tid, int(col), float(b), float(m), int(sid)))
        return cls(entries=tuple(entries))


# ---------------------------------------------------------------------------
# Scheduling
# ---------------------------------------------------------------------------

def generate_schedule(
    config: SynthConfig, seed: int | None = None
) -> list[tuple[str, datetime]]:
    """Lay trials out in time and assign gas labels per the schedule mode.

    All modes share the same session-block time grid (``session_length``
    trials per block, blocks separated by ``inter_session_gap_s``); only the
    label order differs:

    - ``batched``: all trials of one gas contiguous, one gas per block;
    - ``randomized``: a seeded uniform permutation of the trial multiset;
    - ``interleaved``: round-robin over the gas list.
    """
    if seed is None:
        seed = config.seed
    gases = config.gas_labels
    total = len(gases) * config.trials_per_gas
    if config.schedule_mode == "batched":
        labels = [g for g in gases for _ in range(config.trials_per_gas)]
    elif config.schedule_mode == "interleaved":
        labels = [gases[k % len(gases)] for k in range(total)]
    else:
        multiset = [g for g in gases for _ in range(config.trials_per_gas)]
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([seed, _STREAM_SCHEDULE]))
        )
        labels = [multiset[i] for i in rng.permutation(total)]

    block = config.session_length
    offset = 0.0
    out: list[tuple[str, datetime]] = []
    for k, gas in enumerate(labels):
        if k > 0:
            gap = config.inter_session_gap_s if k % block == 0 else config.inter_trial_gap_s
            offset += gap
        out.append((gas, epoch_to_timestamp(config.start_epoch_s + offset)))
    return out


# ---------------------------------------------------------------------------
# Trial simulation
# ---------------------------------------------------------------------------

def response_curve(config: SynthConfig) -> np.ndarray:
    """Normalized first-order gas response g(t) on the sampling grid."""
    n = int(round(config.duration_s * config.rate_hz))
    t = np.arange(n) / config.rate_hz
    tau = config.response_tau_s
    g = np.zeros(n)
    rise = (t >= config.t_release_s) & (t <= config.t_off_s)
    g[rise] = 1.0 - np.exp(-(t[rise] - config.t_release_s) / tau)
    peak = 1.0 - np.exp(-(config.t_off_s - config.t_release_s) / tau)
    decay = t > config.t_off_s
    g[decay] = peak * np.exp(-(t[decay] - config.t_off_s) / tau)
    return g


def simulate_trial(
    config: SynthConfig,
    gas: str,
    recorded_at: datetime,
    baseline: np.ndarray,
    slope: np.ndarray,
    noise: np.ndarray,
    *,
    trial_id: str,
    board_index: int,
    repetition: int,
) -> TrialSeries:
    """Render one trial from its ground-truth drift state.

    ``baseline`` and ``slope`` are per-sensor vectors; ``noise`` is the
    pre-drawn (sensor, sample) Gaussian noise matrix. Resistance is floored
    at zero and the event logged.
    """
    n = int(round(config.duration_s * config.rate_hz))
    t = np.arange(n) / config.rate_hz
    g = response_curve(config)
    amp = config.amplitude(gas)
    values = (
        baseline[:, None] + slope[:, None] * t[None, :] + amp[:, None] * g[None, :]
        + noise
    )
    clipped = int(np.count_nonzero(values < 0))
    if clipped:
        logger.warning(
            "trial %s: floored %d negative resistance samples at 0", trial_id, clipped
        )
        values = np.maximum(values, 0.0)
    meta = TrialMeta(
        trial_id=trial_id,
        gas_label=gas,
        concentration_ppm=config.concentration(gas),
        location_index=config.location_index,
        board_index=board_index,
        fan_speed_mps=config.fan_speed_mps,
        heater_voltage_v=config.heater_voltage_v,
        repetition=repetition,
        recorded_at=recorded_at,
        source_path="synth",
    )
    sensors = tuple(
        SensorChannel(column_index=c + 1, model_name="synth", board_index=board_index)
        for c in range(config.n_sensors_per_board)
    )
    return TrialSeries(
        meta=meta,
        sample_rate_hz=config.rate_hz,
        t_release_s=config.t_release_s,
        t_off_s=config.t_off_s,
        duration_s=config.duration_s,
        sensors=sensors,
        values=values,
        validity=np.ones(config.n_sensors_per_board, dtype=bool),
    )


@dataclass(frozen=True)
class PlannedTrial:
    slot: int
    board_index: int
    trial_id: str
    gas: str
    recorded_at: datetime
    session_id: int
    repetition: int
    baseline: np.ndarray
    slope: np.ndarray


def plan_trials(config: SynthConfig) -> tuple[list[PlannedTrial], DriftTrace]:
    """Draw the schedule and all ground-truth drift states, without rendering
    sample values. Cheap enough for Monte-Carlo property checks."""
    schedule = generate_schedule(config)
    n_slots = len(schedule)
    block = config.session_length
    n_sessions = (n_slots + block - 1) // block
    nb, ns = config.n_boards, config.n_sensors_per_board

    b0 = config._bs(config.baseline_mean0, "baseline_mean0")
    step_sigma = config._bs(config.longterm_step_sigma, "longterm_step_sigma")
    slope_sigma = config._bs(config.shortterm_slope_sigma, "shortterm_slope_sigma")
    offsets = config.slope_offsets()

    step_rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([config.seed, _STREAM_SESSION_STEPS]))
    )
    steps = step_rng.standard_normal((n_sessions, nb, ns))
    steps[0] = 0.0  # the first session starts at baseline_mean0
    baselines = b0[None, :, :] + np.cumsum(steps * step_sigma[None, :, :], axis=0)

    planned: list[PlannedTrial] = []
    entries: list[TraceEntry] = []
    rep_count: dict[tuple[str, int], int] = {}
    for slot, (gas, recorded_at) in enumerate(schedule):
        session = slot // block
        trial_rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([config.seed, _STREAM_TRIAL, slot]))
        )
        slope_z = trial_rng.standard_normal((nb, ns))
        for board in range(1, nb + 1):
            rep = rep_count.get((gas, board), 0) + 1
            rep_count[(gas, board)] = rep
            trial_id = f"t{slot:05d}b{board}"
            baseline = baselines[session, board - 1]
            slope = offsets[gas] + slope_z[board - 1] * slope_sigma[board - 1]
            planned.append(
                PlannedTrial(
                    slot=slot, board_index=board, trial_id=trial_id, gas=gas,
                    recorded_at=recorded_at, session_id=session, repetition=rep,
                    baseline=baseline, slope=slope,
                )
            )
            for s in range(ns):
                entries.append(
                    TraceEntry(trial_id, s + 1, float(baseline[s]), float(slope[s]),
                               session)
                )
    return planned, DriftTrace(entries=tuple(entries))


def _slot_noise(config: SynthConfig, slot: int) -> np.ndarray:
    """Scaled (board, sensor, sample) noise for one schedule slot, drawn from
    the slot's dedicated stream."""
    n = int(round(config.duration_s * config.rate_hz))
    nb, ns = config.n_boards, config.n_sensors_per_board
    trial_rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([config.seed, _STREAM_TRIAL, slot]))
    )
    trial_rng.standard_normal((nb, ns))  # skip the slope draws
    z = trial_rng.standard_normal((nb, ns, n))
    sigma = config._bs(config.noise_sigma, "noise_sigma")
    return z * sigma[:, :, None]


def generate_in_memory(config: SynthConfig) -> tuple[Dataset, DriftTrace]:
    """Generate a dataset without touching the filesystem."""
    planned, trace = plan_trials(config)
    trials = []
    noise_slot, noise = -1, None
    for p in planned:  # slot-major order, so the noise draw is reused per slot
        if p.slot != noise_slot:
            noise_slot, noise = p.slot, _slot_noise(config, p.slot)
        trials.append(
            simulate_trial(
                config, p.gas, p.recorded_at, p.baseline, p.slope,
                noise[p.board_index - 1],
                trial_id=p.trial_id, board_index=p.board_index,
                repetition=p.repetition,
            )
        )
    order = sorted(range(len(trials)),
                   key=lambda i: (trials[i].meta.recorded_at, trials[i].meta.trial_id))
    trials = [trials[i] for i in order]
    manifest = DatasetManifest(trials=tuple(t.meta for t in trials))
    return Dataset(manifest=manifest, trials=tuple(trials)), trace


def generate_dataset(config: SynthConfig, out_dir: str | Path) -> tuple[Dataset, DriftTrace]:
    """Generate a dataset and write it as a canonical store plus ground-truth
    trace file. Byte-identical across runs for the same (config, seed)."""
    dataset, trace = generate_in_memory(config)
    out_dir = Path(out_dir)
    write_dataset(dataset, out_dir)
    trace.write_csv(out_dir / TRACE_NAME)
    return dataset, trace
