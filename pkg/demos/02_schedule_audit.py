"""Quantify how strongly gas identity is confounded with recording time.

Sessions are detected from timestamp gaps; the confounding is scored by
mean session gas purity and by the normalized mutual information between
gas label and session id. A batched campaign scores NMI ~ 1, a properly
randomized one ~ 0.
"""


from driftaudit import SynthConfig, detect_sessions, generate_in_memory, schedule_stats

base = dict(
    gases={f"gas{i}": float(i + 1) for i in range(6)},
    trials_per_gas=40,
    inter_trial_gap_s=300.0,
    inter_session_gap_s=14 * 86400.0,
    t_release_s=5.0, t_off_s=8.0, duration_s=10.0, rate_hz=10.0,
    seed=7,
)

for mode in ("batched", "randomized", "interleaved"):
    dataset, _ = generate_in_memory(SynthConfig(schedule_mode=mode, **base))
    sessions = detect_sessions(dataset.manifest, gap_threshold_s=86_400.0)
    report = schedule_stats(sessions, dataset.labels())
    print(f"{mode:>12}: sessions={report.n_sessions:2d}  "
          f"purity={report.mean_purity:.3f}  NMI={report.nmi:.3f}  "
          f"verdict={report.verdict}")

print("""
reading the numbers:
  - batched runs are nearly gas-pure per session (purity ~ 1, NMI ~ 1),
    so anything that varies between sessions (like baseline drift) can
    stand in for the gas label;
  - randomized runs decorrelate label and time (NMI ~ 0);
  - interleaved runs have mixed sessions (purity ~ 1/n_gases) but a
    perfectly regular label order.
""")
