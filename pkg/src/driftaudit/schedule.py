"""Recording-schedule audit: detect sessions from timestamps and quantify
how strongly gas identity is confounded with recording time.

A new session starts whenever the gap to the previous trial exceeds the
threshold. Confounding is measured by mean session gas purity and by the
normalized mutual information NMI = I(gas; session) / sqrt(H(gas) H(session))
with plug-in entropies in nats.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import LabelMismatch
from .ingest import DatasetManifest

#: One day separates both timescales seen in batched campaigns: minutes
#: between trials within a session, weeks between sessions.
DEFAULT_GAP_THRESHOLD_S = 86_400.0

DEFAULT_NMI_BATCHED = 0.5
DEFAULT_PURITY_BATCHED = 0.9
DEFAULT_NMI_RANDOMIZED = 0.1


@dataclass(frozen=True)
class SessionAssignment:
    """Session id per trial, in manifest (time) order."""

    trial_ids: tuple[str, ...]
    session_ids: np.ndarray
    timestamps_epoch: np.ndarray
    gap_threshold_s: float

    @property
    def n_sessions(self) -> int:
        return 0 if self.session_ids.size == 0 else int(self.session_ids[-1]) + 1

    def session_spans(self) -> list[tuple[float, float]]:
        """(start, end) epoch seconds of each session."""
        spans = []
        for sid in range(self.n_sessions):
            ts = self.timestamps_epoch[self.session_ids == sid]
            spans.append((float(ts.min()), float(ts.max())))
        return spans


@dataclass(frozen=True)
class ScheduleReport:
    """Quantified schedule pathology plus event-plot rows."""

    mean_purity: float
    per_session_purity: tuple[float, ...]
    nmi: float
    n_sessions: int
    verdict: str  # randomized-like | batched | mixed
    thresholds: dict

    def to_jsonable(self) -> dict:
        return {
            "mean_session_purity": self.mean_purity,
            "per_session_purity": list(self.per_session_purity),
            "nmi_gas_session": self.nmi,
            "n_sessions": self.n_sessions,
            "verdict": self.verdict,
            "thresholds": dict(self.thresholds),
        }


def detect_sessions(
    manifest: DatasetManifest, gap_threshold_s: float = DEFAULT_GAP_THRESHOLD_S
) -> SessionAssignment:
    """Split the time-sorted manifest into sessions at gaps > threshold.

    Gaps exactly equal to the threshold stay within the session. Invariant
    under uniform time translation of all timestamps.
    """
    ts = manifest.timestamps_epoch()
    if ts.size == 0:
        ids = np.zeros(0, dtype=int)
    else:
        ids = np.concatenate([[0], np.cumsum(np.diff(ts) > gap_threshold_s)])
        ids = ids.astype(int)
    return SessionAssignment(
        trial_ids=tuple(m.trial_id for m in manifest.trials),
        session_ids=ids,
        timestamps_epoch=ts,
        gap_threshold_s=gap_threshold_s,
    )


def _entropy_nats(counts: np.ndarray) -> float:
    p = counts / counts.sum()
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def _mutual_information_nats(labels_a: Sequence, labels_b: Sequence) -> float:
    n = len(labels_a)
    joint = Counter(zip(labels_a, labels_b))
    ca = Counter(labels_a)
    cb = Counter(labels_b)
    mi = 0.0
    for (a, b), c in joint.items():
        p_ab = c / n
        mi += p_ab * np.log(p_ab * n * n / (ca[a] * cb[b]))
    return float(mi)


def schedule_stats(
    sessions: SessionAssignment,
    labels: Sequence[str],
    *,
    nmi_batched: float = DEFAULT_NMI_BATCHED,
    purity_batched: float = DEFAULT_PURITY_BATCHED,
    nmi_randomized: float = DEFAULT_NMI_RANDOMIZED,
) -> ScheduleReport:
    """Compute session purity, gas/session NMI and the schedule verdict.

    Mean purity averages (max class count / session size) over sessions.
    Zero-entropy marginals (a single session, or a single gas) map to
    NMI = 0. Verdict: ``batched`` iff NMI >= nmi_batched and purity >=
    purity_batched; ``randomized-like`` iff NMI < nmi_randomized; else
    ``mixed``.
    """
    if len(labels) != len(sessions.trial_ids):
        raise LabelMismatch(
            f"{len(labels)} labels for {len(sessions.trial_ids)} trials"
        )
    sids = sessions.session_ids
    purities = []
    for sid in range(sessions.n_sessions):
        sess_labels = [labels[i] for i in np.flatnonzero(sids == sid)]
        purities.append(Counter(sess_labels).most_common(1)[0][1] / len(sess_labels))
    h_gas = _entropy_nats(np.array(list(Counter(labels).values()), dtype=float))
    h_sess = _entropy_nats(np.array(list(Counter(sids.tolist()).values()), dtype=float))
    if h_gas <= 0.0 or h_sess <= 0.0:
        nmi = 0.0
    else:
        mi = _mutual_information_nats(list(labels), sids.tolist())
        nmi = float(np.clip(mi / np.sqrt(h_gas * h_sess), 0.0, 1.0))
    mean_purity = float(np.mean(purities)) if purities else 0.0

    if nmi >= nmi_batched and mean_purity >= purity_batched:
        verdict = "batched"
    elif nmi < nmi_randomized:
        verdict = "randomized-like"
    else:
        verdict = "mixed"
    return ScheduleReport(
        mean_purity=mean_purity,
        per_session_purity=tuple(purities),
        nmi=nmi,
        n_sessions=sessions.n_sessions,
        verdict=verdict,
        thresholds={
            "gap_threshold_s": sessions.gap_threshold_s,
            "nmi_batched": nmi_batched,
            "purity_batched": purity_batched,
            "nmi_randomized": nmi_randomized,
        },
    )


def event_plot_data(
    manifest: DatasetManifest,
) -> list[tuple[str, float, list[float]]]:
    """Group trial timestamps by (gas, concentration) for event plotting.

    Rows are sorted by gas label then concentration; each row carries the
    epoch timestamps of its trials in time order. Summed row lengths equal
    the manifest trial count.
    """
    groups: dict[tuple[str, float], list[float]] = defaultdict(list)
    for m in manifest.trials:
        groups[(m.gas_label, m.concentration_ppm)].append(m.epoch_s)
    return [
        (gas, conc, groups[(gas, conc)]) for gas, conc in sorted(groups.keys())
    ]
