import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from driftaudit import SynthConfig, generate_in_memory


def small_protocol(**overrides):
    """Short trials so suites stay fast: release at 20 s, 20 Hz."""
    kw = dict(
        t_release_s=20.0, t_off_s=21.0, duration_s=22.0, rate_hz=20.0,
        response_tau_s=2.0, inter_trial_gap_s=60.0,
        inter_session_gap_s=7 * 86400.0,
    )
    kw.update(overrides)
    return kw


@pytest.fixture(scope="session")
def batched_drifting_dataset():
    """3 gases x 6 trials, strong session baseline steps, mild noise."""
    cfg = SynthConfig(
        gases={"A": 2.0, "B": [1.0, 3.0, 2.0, 4.0], "C": 5.0},
        trials_per_gas=6, n_sensors_per_board=4, schedule_mode="batched",
        baseline_mean0=50.0, longterm_step_sigma=1.0, noise_sigma=0.02,
        seed=11, **small_protocol(),
    )
    return generate_in_memory(cfg)


@pytest.fixture(scope="session")
def clean_dataset():
    """Zero-drift, zero-noise dataset with dyadic baselines."""
    cfg = SynthConfig(
        gases={"A": 2.0, "B": 1.0, "C": 0.5},
        trials_per_gas=4, n_sensors_per_board=4, schedule_mode="batched",
        baseline_mean0=[50.0, 20.0, 80.0, 10.0],
        seed=5, **small_protocol(),
    )
    return generate_in_memory(cfg)
