"""Selection of minimally drift-affected subsets: temporally proximate gas
groups, least-drifting boards, and exclusion of the worst sensors.

Subsets are pure views: restricting never mutates the source dataset, so
probes on the unrestricted data are unaffected by prior restrictions. The
selection deliberately does not optimize classifier accuracy, which would
reintroduce leakage through the selection itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence


from .driftmetrics import CvFilters, DriftCvRow, cv_map
from .errors import EmptySubset
from .ingest import Dataset, DatasetManifest
from .schedule import SessionAssignment, detect_sessions

#: Two sessions further apart than this are not "temporally proximate".
DEFAULT_MAX_SPAN_S = 14 * 86_400.0

#: Curated defaults for the audited wind-tunnel dataset: three gases recorded
#: in adjacent batches, the least-drifting board, worst sensor removed.
_REFERENCE_GASES = frozenset({"Methanol", "Ethylene", "Butanol"})
_REFERENCE_SENSORS = frozenset({2, 3, 5, 6, 7, 8})

_EXPOSURE_CAVEAT = (
    "the least-drifting board may also be the least gas-exposed; drift "
    "ranking alone cannot disentangle exposure from stability"
)


@dataclass(frozen=True)
class SubsetSpec:
    """A dataset restriction with provenance and the metrics behind it."""

    gases: frozenset[str]
    board_index: int | None
    location_index: int | None
    sensor_columns: frozenset[int]
    provenance: str = "auto-selected"  # "paper-default" | "auto-selected"
    justification: Mapping = field(default_factory=dict)
    caveats: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.gases or not self.sensor_columns:
            raise EmptySubset("subset needs a non-empty gas set and sensor set")

    def to_jsonable(self) -> dict:
        return {
            "gases": sorted(self.gases),
            "board_index": self.board_index,
            "location_index": self.location_index,
            "sensor_columns": sorted(self.sensor_columns),
            "provenance": self.provenance,
            "justification": dict(self.justification),
            "caveats": list(self.caveats),
        }


def reference_subset() -> SubsetSpec:
    """The published benchmark restriction for the audited dataset."""
    return SubsetSpec(
        gases=_REFERENCE_GASES,
        board_index=3,
        location_index=4,
        sensor_columns=_REFERENCE_SENSORS,
        provenance="paper-default",
        justification={
            "gases": "recorded within close temporal proximity",
            "board": "least affected by long-term drift on average",
            "sensors": "worst-drifting sensor column removed",
        },
        caveats=(_EXPOSURE_CAVEAT,),
    )


# ---------------------------------------------------------------------------
# Temporal proximity
# ---------------------------------------------------------------------------

def _gas_spans(
    sessions: SessionAssignment, labels: Sequence[str]
) -> dict[str, tuple[float, float]]:
    spans = sessions.session_spans()
    out: dict[str, tuple[float, float]] = {}
    for gas in sorted(set(labels)):
        sids = {int(sessions.session_ids[i]) for i, g in enumerate(labels) if g == gas}
        starts = [spans[s][0] for s in sids]
        ends = [spans[s][1] for s in sids]
        out[gas] = (min(starts), max(ends))
    return out


def _interval_gap(a: tuple[float, float], b: tuple[float, float]) -> float:
    if a[0] > b[0]:
        a, b = b, a
    return max(0.0, b[0] - a[1])


def _maximal_cliques(nodes: list[str], adj: dict[str, set[str]]) -> list[list[str]]:
    """Bron-Kerbosch with pivoting; fine for the handful of gas labels."""
    cliques: list[list[str]] = []

    def expand(r: set[str], p: set[str], x: set[str]) -> None:
        if not p and not x:
            cliques.append(sorted(r))
            return
        pivot = max(p | x, key=lambda u: len(adj[u] & p))
        for v in sorted(p - adj[pivot]):
            expand(r | {v}, p & adj[v], x & adj[v])
            p = p - {v}
            x = x | {v}

    expand(set(), set(nodes), set())
    return cliques


def temporal_proximity_groups(
    sessions: SessionAssignment,
    labels: Sequence[str],
    max_span_s: float = DEFAULT_MAX_SPAN_S,
) -> list[list[str]]:
    """Maximal sets of gases whose session time-spans pairwise overlap or lie
    within ``max_span_s`` of each other, largest first."""
    spans = _gas_spans(sessions, labels)
    gases = sorted(spans)
    adj = {
        g: {
            h for h in gases
            if h != g and _interval_gap(spans[g], spans[h]) <= max_span_s
        }
        for g in gases
    }
    groups = _maximal_cliques(gases, adj)
    groups.sort(key=lambda grp: (-len(grp), grp))
    return groups


# ---------------------------------------------------------------------------
# Drift ranking
# ---------------------------------------------------------------------------

def rank_drift(
    sensor_rows: Sequence[DriftCvRow],
    location_board_rows: Sequence[DriftCvRow],
) -> tuple[list[int], list[tuple[int, int]]]:
    """Order sensors and (location, board) pairs worst-drifting first.

    Primary key: long-term CV descending; ties by short-term CV descending,
    then ascending index.
    """
    sensors = sorted(
        sensor_rows,
        key=lambda r: (-r.cv_longterm, -r.cv_shortterm, r.column_index),
    )
    boards = sorted(
        location_board_rows,
        key=lambda r: (-r.cv_longterm, -r.cv_shortterm,
                       (r.location_index, r.board_index)),
    )
    return (
        [r.column_index for r in sensors],
        [(r.location_index, r.board_index) for r in boards],
    )


# ---------------------------------------------------------------------------
# Restriction
# ---------------------------------------------------------------------------

def restrict(dataset: Dataset, spec: SubsetSpec) -> Dataset:
    """Filtered view of the dataset: manifest subset plus channel masks."""
    keep = []
    for trial in dataset.trials:
        m = trial.meta
        if m.gas_label not in spec.gases:
            continue
        if spec.board_index is not None and m.board_index != spec.board_index:
            continue
        if spec.location_index is not None and m.location_index != spec.location_index:
            continue
        keep.append(trial)
    if not keep:
        raise EmptySubset("subset specification selects no trials")
    masked = []
    any_valid = False
    for trial in keep:
        mask = trial.validity.copy()
        for i, ch in enumerate(trial.sensors):
            if ch.column_index not in spec.sensor_columns:
                mask[i] = False
        any_valid = any_valid or bool(mask.any())
        masked.append(replace(trial, validity=mask))
    if not any_valid:
        raise EmptySubset("subset specification leaves no valid sensor channels")
    manifest = DatasetManifest(
        trials=tuple(t.meta for t in masked),
        excluded=dataset.manifest.excluded,
        canonical_root=dataset.manifest.canonical_root,
    )
    return Dataset(manifest=manifest, trials=tuple(masked))


# ---------------------------------------------------------------------------
# Automatic selection
# ---------------------------------------------------------------------------

def auto_subset(
    dataset: Dataset,
    *,
    gap_threshold_s: float | None = None,
    max_span_s: float = DEFAULT_MAX_SPAN_S,
    drop_worst_sensors: int = 1,
    filters: CvFilters | None = None,
) -> SubsetSpec:
    """Deterministically select a minimally drift-affected subset.

    Picks the largest temporally proximate gas group, the least-drifting
    (location, board), and drops the ``drop_worst_sensors`` worst sensor
    columns by long-term CV. Every metric used is recorded in the
    justification.
    """
    kw = {} if gap_threshold_s is None else {"gap_threshold_s": gap_threshold_s}
    sessions = detect_sessions(dataset.manifest, **kw)
    groups = temporal_proximity_groups(sessions, dataset.labels(), max_span_s)
    gases = frozenset(groups[0])

    sensor_rows = cv_map(dataset, "sensor_column", filters)
    board_rows = cv_map(dataset, "location_board", filters)
    sensors_ranked, boards_ranked = rank_drift(sensor_rows, board_rows)

    location_index, board_index = boards_ranked[-1]
    dropped = set(sensors_ranked[:max(0, drop_worst_sensors)])
    sensor_columns = frozenset(c for c in sensors_ranked if c not in dropped)

    justification = {
        "proximity_groups": [list(g) for g in groups],
        "max_span_s": max_span_s,
        "gap_threshold_s": sessions.gap_threshold_s,
        "sensor_cv_longterm": {
            str(r.column_index): r.cv_longterm for r in sensor_rows
        },
        "board_cv_longterm": {
            f"L{r.location_index}B{r.board_index}": r.cv_longterm for r in board_rows
        },
        "sensors_dropped": sorted(dropped),
    }
    return SubsetSpec(
        gases=gases,
        board_index=board_index,
        location_index=location_index,
        sensor_columns=sensor_columns,
        provenance="auto-selected",
        justification=justification,
        caveats=(_EXPOSURE_CAVEAT,),
    )
