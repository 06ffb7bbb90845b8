"""Run the complete audit pipeline on two generated campaigns.

The pathological campaign (batched order, session drift) must come out
flagged; the well-designed one (randomized order, no drift) must come out
clean. The same pipeline backs the `driftaudit audit` CLI subcommand.
"""

import tempfile
from pathlib import Path

from driftaudit import format_verdict, run_audit

PROBE = {"width_s": 0.1, "start_times_s": [0.0, 5.0, 10.0, 15.0],
         "n_repeats": 10}


def campaign(mode: str, steps: float) -> dict:
    return {
        "synth": {
            "gases": {f"gas{i}": float(i + 1) for i in range(5)},
            "trials_per_gas": 20,
            "trials_per_session": 50,
            "n_sensors_per_board": 6,
            "schedule_mode": mode,
            "baseline_mean0": 50.0,
            "longterm_step_sigma": steps,
            "noise_sigma": 0.05,
            "t_release_s": 20.0, "t_off_s": 25.0, "duration_s": 30.0,
            "rate_hz": 20.0,
            "inter_trial_gap_s": 300.0, "inter_session_gap_s": 7 * 86400.0,
            "seed": 13,
        },
        "probe": PROBE,
        "seed": 13,
    }


for name, cfg in (
    ("pathological batched campaign", campaign("batched", 0.5)),
    ("well-designed randomized campaign", campaign("randomized", 0.0)),
):
    out = Path(tempfile.mkdtemp(prefix="driftaudit_audit_"))
    verdict, results = run_audit(cfg, out)
    print("=" * 64)
    print(name)
    print("=" * 64)
    print(format_verdict(verdict))
    emitted = sorted(p.name for p in out.glob("*.csv")) + \
        sorted(p.name for p in out.glob("*.json"))
    print(f"\nartifacts in {out}: {', '.join(emitted)}\n")
