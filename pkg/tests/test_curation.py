from datetime import datetime, timezone

import numpy as np
import pytest

from driftaudit import (
    SynthConfig,
    WindowSpec,
    auto_subset,
    cv_map,
    detect_sessions,
    generate_in_memory,
    rank_drift,
    reference_subset,
    restrict,
    temporal_proximity_groups,
    window_features,
)
from driftaudit.curation import SubsetSpec
from driftaudit.driftmetrics import DriftCvRow
from driftaudit.errors import EmptySubset
from driftaudit.ingest import DatasetManifest, TrialMeta

from conftest import small_protocol

DAY = 86_400.0
BASE = 1_600_000_000.0


def _manifest(gas_epochs):
    metas = []
    for k, (gas, epoch) in enumerate(sorted(gas_epochs, key=lambda p: p[1])):
        metas.append(
            TrialMeta(
                trial_id=f"t{k:04d}", gas_label=gas, concentration_ppm=100.0,
                location_index=1, board_index=1, fan_speed_mps=0.21,
                heater_voltage_v=6.0, repetition=1,
                recorded_at=datetime.fromtimestamp(epoch, tz=timezone.utc),
            )
        )
    return DatasetManifest(trials=tuple(metas))


# ---------------------------------------------------------------------------
# temporal proximity
# ---------------------------------------------------------------------------

def test_three_gases_in_one_week_form_a_group():
    pairs = []
    for i, gas in enumerate(["Methanol", "Ethylene", "Butanol"]):
        pairs += [(gas, BASE + i * 2 * DAY), (gas, BASE + i * 2 * DAY + 60)]
    for i, gas in enumerate(["Acetone", "Toluene"]):
        pairs += [(gas, BASE + (90 + 40 * i) * DAY),
                  (gas, BASE + (90 + 40 * i) * DAY + 60)]
    man = _manifest(pairs)
    sessions = detect_sessions(man, DAY)
    groups = temporal_proximity_groups(
        sessions, [m.gas_label for m in man.trials], max_span_s=14 * DAY)
    assert groups[0] == ["Butanol", "Ethylene", "Methanol"]
    assert all(len(g) == 1 for g in groups[1:])


def test_all_gases_in_one_session_form_single_group():
    pairs = [(g, BASE + i * 60) for i, g in enumerate("abcdef")]
    man = _manifest(pairs)
    sessions = detect_sessions(man, DAY)
    groups = temporal_proximity_groups(
        sessions, [m.gas_label for m in man.trials])
    assert groups == [["a", "b", "c", "d", "e", "f"]]


def test_groups_match_synthetic_gap_structure():
    # batched blocks a,b adjacent; c far away
    cfg = SynthConfig(
        gases={"a": 1.0, "b": 2.0, "c": 3.0}, trials_per_gas=3,
        schedule_mode="batched", seed=1,
        inter_trial_gap_s=60.0, inter_session_gap_s=10 * DAY,
        t_release_s=1.0, t_off_s=2.0, duration_s=3.0, rate_hz=2.0,
    )
    dataset, _ = generate_in_memory(cfg)
    sessions = detect_sessions(dataset.manifest, DAY)
    groups = temporal_proximity_groups(sessions, dataset.labels(),
                                       max_span_s=11 * DAY)
    # each block is 10 days from its neighbour: a-b and b-c pair up
    assert ["a", "b"] in groups and ["b", "c"] in groups


# ---------------------------------------------------------------------------
# drift ranking
# ---------------------------------------------------------------------------

def _row(col=None, loc=None, board=None, lt=0.0, st=0.0):
    return DriftCvRow(
        group_by="sensor_column" if col else "location_board",
        location_index=loc, board_index=board, column_index=col,
        cv_longterm=lt, cv_shortterm=st, n_trials=4,
    )


def test_rank_drift_sensor_four_first():
    cfg = SynthConfig(
        gases={"a": 1.0, "b": 2.0}, trials_per_gas=8, n_sensors_per_board=6,
        baseline_mean0=50.0, longterm_step_sigma=[0.1, 0.1, 0.1, 1.0, 0.1, 0.1],
        seed=21, **small_protocol(),
    )
    dataset, _ = generate_in_memory(cfg)
    sensors, _boards = rank_drift(cv_map(dataset, "sensor_column"),
                                  cv_map(dataset, "location_board"))
    assert sensors[0] == 4


def test_rank_drift_ties_fall_back_to_index():
    sensors, boards = rank_drift(
        [_row(col=3), _row(col=1), _row(col=2)],
        [_row(loc=1, board=2), _row(loc=1, board=1)],
    )
    assert sensors == [1, 2, 3]
    assert boards == [(1, 1), (1, 2)]


def test_rank_drift_zero_drift_board_least_affected():
    sensors, boards = rank_drift(
        [_row(col=1, lt=0.5)],
        [_row(loc=1, board=1, lt=0.0), _row(loc=1, board=2, lt=0.9)],
    )
    assert boards == [(1, 2), (1, 1)]  # worst first


# ---------------------------------------------------------------------------
# restriction
# ---------------------------------------------------------------------------

def test_restrict_identity(batched_drifting_dataset):
    dataset, _ = batched_drifting_dataset
    spec = SubsetSpec(
        gases=frozenset(dataset.labels()), board_index=None,
        location_index=None, sensor_columns=frozenset({1, 2, 3, 4}),
    )
    view = restrict(dataset, spec)
    assert len(view) == len(dataset)
    assert view.common_valid_columns() == dataset.common_valid_columns()


def test_restrict_absent_gas(batched_drifting_dataset):
    dataset, _ = batched_drifting_dataset
    spec = SubsetSpec(gases=frozenset({"Xenon"}), board_index=None,
                      location_index=None, sensor_columns=frozenset({1}))
    with pytest.raises(EmptySubset):
        restrict(dataset, spec)


def test_restrict_is_a_pure_view(batched_drifting_dataset):
    dataset, _ = batched_drifting_dataset
    spec_obj = WindowSpec(width_s=0.1, start_times_s=(0.0, 5.0))
    before = [fm.X.copy() for fm in window_features(dataset, spec_obj)]
    sub = SubsetSpec(gases=frozenset({"A"}), board_index=None,
                     location_index=None, sensor_columns=frozenset({2, 3}))
    view = restrict(dataset, sub)
    assert len(view) == 6
    assert view.common_valid_columns() == (2, 3)
    after = [fm.X for fm in window_features(dataset, spec_obj)]
    for a, b in zip(before, after):
        assert np.array_equal(a, b)
    assert dataset.common_valid_columns() == (1, 2, 3, 4)


# ---------------------------------------------------------------------------
# automatic selection
# ---------------------------------------------------------------------------

def _two_board_dataset():
    return SynthConfig(
        gases={"a": 1.0, "b": 2.0, "c": 3.0}, trials_per_gas=6,
        n_boards=2, n_sensors_per_board=4, baseline_mean0=50.0,
        longterm_step_sigma=np.array([[0.0] * 4, [1.0] * 4]),
        noise_sigma=0.01, seed=15, **small_protocol(),
    )


def test_auto_subset_picks_clean_board():
    dataset, _ = generate_in_memory(_two_board_dataset())
    spec = auto_subset(dataset)
    assert spec.board_index == 1
    assert spec.provenance == "auto-selected"
    assert spec.justification["board_cv_longterm"]["L4B2"] > \
        spec.justification["board_cv_longterm"]["L4B1"]


def test_auto_subset_deterministic_and_documented():
    dataset, _ = generate_in_memory(_two_board_dataset())
    a = auto_subset(dataset)
    b = auto_subset(dataset)
    assert a.to_jsonable() == b.to_jsonable()
    assert a.justification["sensors_dropped"]
    assert a.caveats


def test_auto_subset_drops_worst_sensor():
    cfg = SynthConfig(
        gases={"a": 1.0, "b": 2.0}, trials_per_gas=8, n_sensors_per_board=6,
        baseline_mean0=50.0, longterm_step_sigma=[0.1, 0.1, 0.1, 1.0, 0.1, 0.1],
        noise_sigma=0.01, seed=21, **small_protocol(),
    )
    dataset, _ = generate_in_memory(cfg)
    spec = auto_subset(dataset)
    assert 4 not in spec.sensor_columns
    assert spec.sensor_columns == frozenset({1, 2, 3, 5, 6})


def test_reference_subset_contents():
    spec = reference_subset()
    assert spec.gases == frozenset({"Methanol", "Ethylene", "Butanol"})
    assert (spec.location_index, spec.board_index) == (4, 3)
    assert spec.sensor_columns == frozenset({2, 3, 5, 6, 7, 8})
    assert spec.provenance == "paper-default"
