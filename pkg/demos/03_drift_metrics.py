"""Locate drift: coefficient-of-variation tables by sensor and by board.

Long-term CV measures how much the trial-wise baseline mean wanders over
the whole campaign; short-term CV measures the baseline wobble within
single trials. Here sensor 4 is configured to drift ten times harder, and
board 2 carries all of the long-term drift, so both show up at the top of
their rankings.
"""

import numpy as np

from driftaudit import SynthConfig, cv_map, generate_in_memory, rank_drift

config = SynthConfig(
    gases={"Methanol": 2.0, "Ethylene": 3.0, "Butanol": 4.0},
    trials_per_gas=8,
    n_boards=2,
    n_sensors_per_board=6,
    baseline_mean0=50.0,
    # rows = boards, columns = sensors: board 1 clean, board 2 drifting,
    # sensor 4 drifting hardest everywhere
    longterm_step_sigma=np.array([
        [0.02, 0.02, 0.02, 0.2, 0.02, 0.02],
        [0.40, 0.40, 0.40, 4.0, 0.40, 0.40],
    ]),
    shortterm_slope_sigma=0.005,
    noise_sigma=0.02,
    t_release_s=20.0, t_off_s=25.0, duration_s=30.0, rate_hz=20.0,
    inter_trial_gap_s=300.0, inter_session_gap_s=7 * 86400.0,
    seed=99,
)

dataset, _ = generate_in_memory(config)
sensor_rows = cv_map(dataset, "sensor_column")
board_rows = cv_map(dataset, "location_board")

print("per-sensor drift (averaged over boards):")
for row in sensor_rows:
    bar = "#" * int(200 * row.cv_longterm)
    print(f"  sensor {row.column_index}:  long-term CV {row.cv_longterm:.4f}  "
          f"short-term {row.cv_shortterm:.6f}  {bar}")

print("\nper-board drift (averaged over sensors):")
for row in board_rows:
    print(f"  location {row.location_index} board {row.board_index}:  "
          f"long-term CV {row.cv_longterm:.4f}  "
          f"short-term {row.cv_shortterm:.6f}")

sensors_worst_first, boards_worst_first = rank_drift(sensor_rows, board_rows)
print(f"\nworst sensor:          column {sensors_worst_first[0]}")
print(f"least affected board:  location/board {boards_worst_first[-1]}")
