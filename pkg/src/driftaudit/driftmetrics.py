"""Baseline statistics and coefficient-of-variation drift tables.

The baseline of a trial is its pre-release window (t < t_release). Long-term
drift is the CV of trial-wise baseline means across a group of trials;
short-term drift is the average of within-trial sigma-to-mu ratios. Both use
the population (1/N) standard deviation so small hand-checked cases are
exact. The pre-release-window choice is recorded in every emitted report.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyGroup, InsufficientTrials, NoValidSamples, ZeroMean
from .ingest import Dataset, TrialSeries

#: Recorded in reports: which window the baseline statistics use.
BASELINE_WINDOW = "pre_release"


@dataclass(frozen=True)
class BaselineStats:
    """Mean/std of one sensor's pre-release window in one trial."""

    trial_id: str
    column_index: int
    mu_kohm: float
    sigma_kohm: float
    n_samples: int


@dataclass(frozen=True)
class CvFilters:
    """Trial filters for CV maps; None leaves a field unconstrained."""

    fan_speed_mps: float | None = None
    heater_voltage_v: float | None = None
    gases: frozenset[str] | None = None

    def matches(self, trial: TrialSeries) -> bool:
        m = trial.meta
        if self.fan_speed_mps is not None and not np.isclose(
            m.fan_speed_mps, self.fan_speed_mps, rtol=1e-9, atol=1e-9
        ):
            return False
        if self.heater_voltage_v is not None and not np.isclose(
            m.heater_voltage_v, self.heater_voltage_v, rtol=1e-9, atol=1e-9
        ):
            return False
        if self.gases is not None and m.gas_label not in self.gases:
            return False
        return True


@dataclass(frozen=True)
class DriftCvRow:
    """One row of a drift CV table, keyed by board location or by sensor."""

    group_by: str  # "location_board" | "sensor_column"
    location_index: int | None
    board_index: int | None
    column_index: int | None
    cv_longterm: float
    cv_shortterm: float
    n_trials: int


def baseline_stats(trial: TrialSeries) -> list[BaselineStats]:
    """Per-sensor baseline mean and population std over t < t_release."""
    k = int(round(trial.t_release_s * trial.sample_rate_hz))
    if trial.t_release_s <= 0 or k < 1:
        raise NoValidSamples(f"{trial.meta.trial_id}: no pre-release samples")
    out = []
    for i, ch in enumerate(trial.sensors):
        if not trial.validity[i]:
            continue
        window = trial.values[i, :k]
        out.append(
            BaselineStats(
                trial_id=trial.meta.trial_id,
                column_index=ch.column_index,
                mu_kohm=float(np.mean(window)),
                sigma_kohm=float(np.std(window)),
                n_samples=k,
            )
        )
    if not out:
        raise NoValidSamples(f"{trial.meta.trial_id}: no valid sensors")
    return out


def longterm_cv(trial_group: Sequence[BaselineStats]) -> float:
    """CV of the trial-wise baseline means across the group."""
    if len(trial_group) < 2:
        raise InsufficientTrials("long-term CV needs >= 2 trials")
    mus = np.array([b.mu_kohm for b in trial_group])
    mean = float(np.mean(mus))
    if mean <= 0.0:
        raise ZeroMean(f"group mean {mean} is not positive")
    return float(np.std(mus)) / mean


def shortterm_cv(trial_group: Sequence[BaselineStats]) -> float:
    """Average of within-trial sigma-to-mu ratios over the group."""
    if not trial_group:
        raise InsufficientTrials("short-term CV needs >= 1 trial")
    mus = np.array([b.mu_kohm for b in trial_group])
    if np.any(mus <= 0.0):
        raise ZeroMean("some within-trial baseline mean is not positive")
    sigmas = np.array([b.sigma_kohm for b in trial_group])
    return float(np.mean(sigmas / mus))


def cv_map(
    dataset: Dataset,
    group_by: str = "location_board",
    filters: CvFilters | None = None,
) -> list[DriftCvRow]:
    """Drift CV table grouped by (location, board) or by sensor column.

    The atomic unit is one (location, board, sensor) trial group; grouped
    rows average the atomic CVs over the collapsed axis, which keeps both
    statistics invariant under per-sensor rescaling.
    """
    if group_by not in ("location_board", "sensor_column"):
        raise ValueError(f"unknown group_by {group_by!r}")
    filters = filters or CvFilters()
    trials = [t for t in dataset.trials if filters.matches(t)]
    if not trials:
        raise EmptyGroup("filters match no trials")

    atomic: dict[tuple[int, int, int], list[BaselineStats]] = {}
    for t in trials:
        key_lb = (t.meta.location_index, t.meta.board_index)
        for stats in baseline_stats(t):
            atomic.setdefault((*key_lb, stats.column_index), []).append(stats)

    cv_lt = {k: longterm_cv(g) for k, g in atomic.items()}
    cv_st = {k: shortterm_cv(g) for k, g in atomic.items()}

    rows: list[DriftCvRow] = []
    if group_by == "location_board":
        keys = sorted({(loc, board) for loc, board, _ in atomic})
        for loc, board in keys:
            cols = [k for k in atomic if k[:2] == (loc, board)]
            n = max(len(atomic[k]) for k in cols)
            rows.append(
                DriftCvRow(
                    group_by=group_by, location_index=loc, board_index=board,
                    column_index=None,
                    cv_longterm=float(np.mean([cv_lt[k] for k in cols])),
                    cv_shortterm=float(np.mean([cv_st[k] for k in cols])),
                    n_trials=n,
                )
            )
    else:
        columns = sorted({col for _, _, col in atomic})
        for col in columns:
            keys = [k for k in atomic if k[2] == col]
            n = sum(len(atomic[k]) for k in keys)
            rows.append(
                DriftCvRow(
                    group_by=group_by, location_index=None, board_index=None,
                    column_index=col,
                    cv_longterm=float(np.mean([cv_lt[k] for k in keys])),
                    cv_shortterm=float(np.mean([cv_st[k] for k in keys])),
                    n_trials=n,
                )
            )
    return rows
