import dataclasses
from datetime import datetime, timezone

import numpy as np
import pytest

from driftaudit import (
    AdapterSpec,
    SynthConfig,
    apply_channel_exclusions,
    build_manifest,
    generate_in_memory,
    ingest_dataset,
    parse_trial_file,
    resample_uniform,
    voltage_to_resistance,
)
from driftaudit.errors import (
    DegenerateSeries,
    EmptyDataset,
    EmptyTrial,
    MalformedPayload,
    OutOfRangeVoltage,
    UnknownColumn,
)
from driftaudit.ingest import read_trial, resistance_to_voltage, write_trial

from conftest import small_protocol
from oracles import pointwise_interpolate


# ---------------------------------------------------------------------------
# voltage conversion
# ---------------------------------------------------------------------------

def test_voltage_midpoint_gives_load_resistance():
    assert voltage_to_resistance(1.555) == 10.0


def test_voltage_tenth_gives_nine_times_load():
    assert voltage_to_resistance(0.311) == pytest.approx(90.0, rel=1e-12)


@pytest.mark.parametrize("v", [3.11, 0.0, -0.5, 3.5])
def test_voltage_out_of_range(v):
    with pytest.raises(OutOfRangeVoltage):
        voltage_to_resistance(v)


def test_voltage_round_trip_inverse():
    rng = np.random.default_rng(1)
    v = rng.uniform(0.01, 3.0, size=10_000)
    for vi in v:
        r = voltage_to_resistance(float(vi))
        back = resistance_to_voltage(r)
        assert abs(back - vi) / vi < 1e-9


def test_voltage_strictly_decreasing():
    v = np.sort(np.random.default_rng(2).uniform(0.01, 3.0, size=200))
    r = np.array([voltage_to_resistance(float(x)) for x in v])
    assert np.all(np.diff(r) < 0)


# ---------------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------------

def test_resample_midpoint_example():
    out = resample_uniform(np.array([0.0, 1.0]), np.array([1.0, 3.0]), 2.0)
    assert out.tolist() == [1.0, 2.0, 3.0]


def test_resample_identity_on_uniform_input():
    rate = 8.0
    t = np.arange(32) / rate
    v = np.random.default_rng(3).uniform(1, 5, size=32)
    out = resample_uniform(t, v, rate, duration_s=32 / rate)
    assert np.array_equal(out, v)


def test_resample_explicit_duration_length():
    out = resample_uniform(np.array([0.0, 1.0]), np.array([0.0, 1.0]), 100.0,
                           duration_s=2.6)
    assert out.shape == (260,)


def test_resample_edge_hold():
    out = resample_uniform(np.array([1.0, 2.0]), np.array([5.0, 7.0]), 1.0,
                           duration_s=4.0)
    assert out.tolist() == [5.0, 5.0, 7.0, 7.0]


def test_resample_matches_pointwise_oracle():
    rng = np.random.default_rng(4)
    for _ in range(25):
        n = rng.integers(2, 40)
        t = np.sort(rng.uniform(0, 10, size=n))
        while np.any(np.diff(t) <= 0):
            t = np.sort(rng.uniform(0, 10, size=n))
        v = rng.uniform(-3, 3, size=n)
        rate = float(rng.choice([2.0, 5.0, 16.0, 100.0]))
        got = resample_uniform(t, v, rate)
        want = pointwise_interpolate(t, v, rate)
        assert np.max(np.abs(got - want)) == 0.0


def test_resample_exact_on_affine_dyadic_input():
    # dyadic grid and coefficients make float interpolation exact
    t = np.array([0.0, 0.25, 1.0, 1.75, 3.0])
    v = 2.0 * t + 1.0
    out = resample_uniform(t, v, 4.0, duration_s=3.25)
    grid = np.arange(13) / 4.0
    assert np.array_equal(out, 2.0 * grid + 1.0)


@pytest.mark.parametrize(
    "t,v",
    [
        (np.array([1.0]), np.array([2.0])),
        (np.array([0.0, 0.0]), np.array([1.0, 2.0])),
        (np.array([1.0, 0.5]), np.array([1.0, 2.0])),
    ],
)
def test_resample_degenerate(t, v):
    with pytest.raises(DegenerateSeries):
        resample_uniform(t, v, 2.0)


# ---------------------------------------------------------------------------
# raw file parsing
# ---------------------------------------------------------------------------

RAW_ADAPTER = AdapterSpec(
    filename_pattern=r"^(?P<timestamp>\d{8}_\d{6})_(?P<gas>\w+)\.csv$",
    units="volts",
    has_header=False,
    exclude_columns=(),
    defaults={
        "concentration_ppm": 100.0, "location_index": 4, "board_index": 1,
        "fan_speed_mps": 0.21, "heater_voltage_v": 6.0, "repetition": 1,
    },
    rate_hz=2.0, t_release_s=1.0, t_off_s=2.0, duration_s=3.0,
)


def _write_raw(tmp_path, name, rows):
    path = tmp_path / name
    path.write_text("\n".join(",".join(str(c) for c in row) for row in rows) + "\n")
    return path


def test_parse_trial_filename_timestamp(tmp_path):
    path = _write_raw(tmp_path, "20110510_160002_Methanol.csv",
                      [[0.0, 1.0, 1.5], [1.0, 1.1, 1.4], [2.0, 1.2, 1.3]])
    meta, channels = parse_trial_file(path, RAW_ADAPTER)
    assert meta.recorded_at == datetime(2011, 5, 10, 16, 0, 2, tzinfo=timezone.utc)
    assert meta.gas_label == "Methanol"
    assert [c.column_index for c in channels] == [1, 2]
    assert channels[0].times.tolist() == [0.0, 1.0, 2.0]


def test_parse_trial_nonnumeric_cell(tmp_path):
    path = _write_raw(tmp_path, "20110510_160002_Methanol.csv",
                      [[0.0, 1.0], [1.0, "oops"]])
    with pytest.raises(MalformedPayload):
        parse_trial_file(path, RAW_ADAPTER)


def test_parse_trial_column_count_mismatch(tmp_path):
    path = _write_raw(tmp_path, "20110510_160002_Methanol.csv",
                      [[0.0, 1.0, 2.0], [1.0, 1.1]])
    with pytest.raises(MalformedPayload):
        parse_trial_file(path, RAW_ADAPTER)


def test_parse_trial_empty(tmp_path):
    path = tmp_path / "20110510_160002_Methanol.csv"
    path.write_text("")
    with pytest.raises(EmptyTrial):
        parse_trial_file(path, RAW_ADAPTER)


def test_parse_trial_blank_cells_become_gaps(tmp_path):
    path = tmp_path / "20110510_160002_Methanol.csv"
    path.write_text("0.0,1.0,\n1.0,,1.4\n2.0,1.2,1.3\n")
    _meta, channels = parse_trial_file(path, RAW_ADAPTER)
    assert channels[0].times.tolist() == [0.0, 2.0]
    assert channels[1].times.tolist() == [1.0, 2.0]


# ---------------------------------------------------------------------------
# canonical store round trip
# ---------------------------------------------------------------------------

def test_canonical_round_trip_identical(tmp_path, clean_dataset):
    dataset, _trace = clean_dataset
    trial = dataset.trials[0]
    rel = write_trial(trial, tmp_path)
    back = read_trial(tmp_path / rel)
    assert back.meta == trial.meta
    assert np.array_equal(back.values, trial.values)
    assert np.array_equal(back.validity, trial.validity)
    assert back.sample_rate_hz == trial.sample_rate_hz
    assert back.duration_s == trial.duration_s
    assert back.columns == trial.columns


def test_round_trip_noisy_values(tmp_path, batched_drifting_dataset):
    dataset, _ = batched_drifting_dataset
    trial = dataset.trials[3]
    rel = write_trial(trial, tmp_path)
    back = read_trial(tmp_path / rel)
    assert np.array_equal(back.values, trial.values)


def test_round_trip_model_names_with_commas(tmp_path, clean_dataset):
    dataset, _ = clean_dataset
    trial = dataset.trials[0]
    sensors = tuple(
        dataclasses.replace(ch, model_name=f"ACME {i}, rev B")
        for i, ch in enumerate(trial.sensors)
    )
    trial = dataclasses.replace(trial, sensors=sensors)
    rel = write_trial(trial, tmp_path)
    back = read_trial(tmp_path / rel)
    assert [ch.model_name for ch in back.sensors] == \
        [ch.model_name for ch in sensors]


# ---------------------------------------------------------------------------
# channel exclusions
# ---------------------------------------------------------------------------

def _eight_channel_dataset():
    cfg = SynthConfig(
        gases={"A": 1.0, "B": 2.0}, trials_per_gas=2, n_sensors_per_board=8,
        seed=3, **small_protocol(),
    )
    return generate_in_memory(cfg)[0]


def test_exclude_default_column_one():
    ds = _eight_channel_dataset()
    out = apply_channel_exclusions(ds)
    assert out.common_valid_columns() == (2, 3, 4, 5, 6, 7, 8)


def test_exclude_empty_set_is_identity():
    ds = _eight_channel_dataset()
    out = apply_channel_exclusions(ds, set())
    assert out is ds


def test_exclude_unknown_column():
    ds = _eight_channel_dataset()
    with pytest.raises(UnknownColumn):
        apply_channel_exclusions(ds, {9})


# ---------------------------------------------------------------------------
# manifest construction
# ---------------------------------------------------------------------------

def test_build_manifest_sorts_by_time(tmp_path):
    rows = [[0.0, 1.0], [1.0, 1.1], [2.0, 1.2]]
    for stamp in ("20110510_120000", "20110510_110000", "20110510_130000"):
        _write_raw(tmp_path, f"{stamp}_Methanol.csv", rows)
    manifest = build_manifest(tmp_path, RAW_ADAPTER)
    hours = [m.recorded_at.hour for m in manifest.trials]
    assert hours == [11, 12, 13]


def test_build_manifest_excludes_corrupt_file(tmp_path):
    rows = [[0.0, 1.0], [1.0, 1.1]]
    for i in range(9):
        _write_raw(tmp_path, f"2011051{i}_110000_Methanol.csv", rows)
    (tmp_path / "20110519_110000_Methanol.csv").write_text("0.0,bad\n")
    manifest = build_manifest(tmp_path, RAW_ADAPTER)
    assert len(manifest.trials) == 9
    assert len(manifest.excluded) == 1
    assert "MalformedPayload" in manifest.excluded[0][1]


def test_build_manifest_idempotent(tmp_path):
    rows = [[0.0, 1.0], [1.0, 1.1]]
    for i in range(3):
        _write_raw(tmp_path, f"2011051{i}_110000_Methanol.csv", rows)
    first = build_manifest(tmp_path, RAW_ADAPTER)
    second = build_manifest(tmp_path, RAW_ADAPTER)
    assert [m.trial_id for m in first.trials] == [m.trial_id for m in second.trials]
    assert first.excluded == second.excluded


def test_build_manifest_empty(tmp_path):
    (tmp_path / "notes.txt").write_text("hello")
    with pytest.raises(EmptyDataset):
        build_manifest(tmp_path, RAW_ADAPTER)


def test_synthetic_manifest_sorted_and_counted():
    cfg = SynthConfig(
        gases={f"g{i}": float(i + 1) for i in range(10)}, trials_per_gas=30,
        n_sensors_per_board=2, seed=9,
        t_release_s=1.0, t_off_s=2.0, duration_s=3.0, rate_hz=4.0,
        inter_trial_gap_s=60.0, inter_session_gap_s=86400.0,
    )
    dataset, _ = generate_in_memory(cfg)
    assert len(dataset) == 300
    ts = dataset.manifest.timestamps_epoch()
    assert np.all(np.diff(ts) > 0)


# ---------------------------------------------------------------------------
# full raw-to-canonical ingestion
# ---------------------------------------------------------------------------

def test_ingest_volts_dataset(tmp_path):
    raw = tmp_path / "raw"
    raw.mkdir()
    # sensor 2 saturates in the second file
    _write_raw(raw, "20110510_110000_Methanol.csv",
               [[0.0, 1.0, 1.5], [1.0, 1.1, 1.4], [2.0, 1.2, 1.3]])
    _write_raw(raw, "20110510_120000_Ethylene.csv",
               [[0.0, 1.0, 3.2], [1.0, 1.1, 1.4], [2.0, 1.2, 1.3]])
    out = tmp_path / "canon"
    dataset = ingest_dataset(raw, RAW_ADAPTER, out)
    assert len(dataset) == 2
    first, second = dataset.trials
    assert first.validity.tolist() == [True, True]
    assert second.validity.tolist() == [True, False]
    # volts converted through the divider law
    assert first.values[0, 0] == voltage_to_resistance(1.0)
    assert (out / "manifest.csv").is_file()


def test_trial_series_shape_invariant(clean_dataset):
    dataset, _ = clean_dataset
    trial = dataset.trials[0]
    assert trial.n_samples == round(trial.duration_s * trial.sample_rate_hz)
    with pytest.raises(MalformedPayload):
        dataclasses.replace(trial, values=trial.values[:, :-1])
