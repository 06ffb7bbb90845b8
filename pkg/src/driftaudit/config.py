"""Configuration handling: adapter grammars, the global config file and
environment overrides.

The global config is a single JSON file with sections::

    {
      "dataset": {"root": "path/to/canonical/store"},
      "adapter": {...},          # how to read raw (non-canonical) trial files
      "synth":   {...},          # synthetic dataset generation parameters
      "audit":   {...},          # thresholds for the audit verdict
      "probe":   {...},          # probe pipeline settings
      "out_dir": "out"
    }

Any key can be overridden from the environment with
``DRIFTAUDIT_<SECTION>__<KEY>=<value>`` (two underscores between section and
key, value parsed as JSON when possible). Top-level keys use
``DRIFTAUDIT_<KEY>``.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError

ENV_PREFIX = "DRIFTAUDIT_"

#: Default supply constants of the sensor read-out circuit. The load resistor
#: and reference voltage are overridable per adapter.
DEFAULT_LOAD_KOHM = 10.0
DEFAULT_VREF_V = 3.11

TIMESTAMP_FMT = "%Y-%m-%dT%H:%M:%SZ"


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 UTC timestamp like ``2011-05-10T16:00:02Z``."""
    text = text.strip()
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError as exc:
        raise ConfigError(f"unparseable timestamp {text!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    """Render a UTC timestamp with 1 s resolution."""
    return dt.astimezone(timezone.utc).strftime(TIMESTAMP_FMT)


def epoch_to_timestamp(epoch_s: float) -> datetime:
    return datetime.fromtimestamp(round(epoch_s), tz=timezone.utc)


@dataclass(frozen=True)
class AdapterSpec:
    """Declarative grammar for reading trial files of a source dataset.

    The filename pattern is a regex with named capture groups. Recognized
    groups: ``trial_id``, ``timestamp``, ``gas``, ``concentration``,
    ``location``, ``board``, ``fan``, ``voltage``, ``repetition``. Fields not
    captured by the filename fall back to ``defaults``. ``meta_source`` can be
    set to ``"sidecar"`` (the canonical store layout), in which case metadata
    is read from the ``<stem>.meta`` key=value file next to the payload.
    """

    filename_pattern: str
    timestamp_format: str = "%Y%m%d_%H%M%S"
    meta_source: str = "filename"        # "filename" | "sidecar"
    units: str = "kohm"                  # "kohm" | "volts"
    load_kohm: float = DEFAULT_LOAD_KOHM
    vref_v: float = DEFAULT_VREF_V
    delimiter: str = ","
    has_header: bool = True
    time_column: int = 0                 # payload column holding seconds
    sensor_columns: tuple[int, ...] = () # sensor index per payload column; () = auto 1..N
    exclude_columns: tuple[int, ...] = (1,)
    defaults: Mapping[str, Any] = field(default_factory=dict)
    # trial protocol used when canonicalizing raw data
    rate_hz: float = 100.0
    t_release_s: float = 20.0
    t_off_s: float = 200.0
    duration_s: float = 260.0

    def __post_init__(self) -> None:
        try:
            re.compile(self.filename_pattern)
        except re.error as exc:
            raise ConfigError(f"bad filename_pattern: {exc}") from exc
        if self.units not in ("kohm", "volts"):
            raise ConfigError(f"units must be 'kohm' or 'volts', got {self.units!r}")
        if self.meta_source not in ("filename", "sidecar"):
            raise ConfigError(f"meta_source must be 'filename' or 'sidecar'")
        if self.units == "volts" and not (self.vref_v > 0 and self.load_kohm > 0):
            raise ConfigError("volts adapter needs positive vref_v and load_kohm")
        if not (0 <= self.t_release_s < self.t_off_s <= self.duration_s):
            raise ConfigError("need 0 <= t_release_s < t_off_s <= duration_s")
        if self.rate_hz <= 0:
            raise ConfigError("rate_hz must be positive")

    @classmethod
    def from_mapping(cls, m: Mapping[str, Any]) -> "AdapterSpec":
        known = {
            "filename_pattern", "timestamp_format", "meta_source", "units",
            "load_kohm", "vref_v", "delimiter", "has_header", "time_column",
            "sensor_columns", "exclude_columns", "defaults",
            "rate_hz", "t_release_s", "t_off_s", "duration_s",
        }
        unknown = set(m) - known - {"root"}
        if unknown:
            raise ConfigError(f"unknown adapter keys: {sorted(unknown)}")
        kw = {k: v for k, v in m.items() if k in known}
        for tup in ("sensor_columns", "exclude_columns"):
            if tup in kw:
                kw[tup] = tuple(int(c) for c in kw[tup])
        return cls(**kw)


#: Adapter matching the package's own canonical trial store.
CANONICAL_ADAPTER = AdapterSpec(
    filename_pattern=r"^(?P<trial_id>[\w.\-]+)\.csv$",
    meta_source="sidecar",
    units="kohm",
    exclude_columns=(),
)


def load_config(path: str | Path, environ: Mapping[str, str] | None = None) -> dict:
    """Load the global JSON config and apply environment overrides."""
    p = Path(path)
    try:
        cfg = json.loads(p.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {p}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return apply_env_overrides(cfg, os.environ if environ is None else environ)


def apply_env_overrides(cfg: dict, environ: Mapping[str, str]) -> dict:
    """Overlay ``DRIFTAUDIT_SECTION__KEY`` environment variables onto cfg."""
    out = json.loads(json.dumps(cfg))  # deep copy, JSON-only values
    for name, raw in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        dotted = name[len(ENV_PREFIX):].lower()
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = dotted.split("__")
        node = out
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot override non-section key {part!r}")
        node[parts[-1]] = value
    return out
