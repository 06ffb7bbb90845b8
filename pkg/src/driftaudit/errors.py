"""Exception hierarchy for the audit toolkit.

Every error raised by this package derives from AuditError so callers can
catch toolkit failures in one clause while letting programming errors
propagate.
"""


class AuditError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(AuditError):
    """Invalid or inconsistent configuration."""


# --- ingest ---------------------------------------------------------------

class UnparseableFilename(AuditError):
    """Filename does not match the adapter's grammar."""


class MalformedPayload(AuditError):
    """Payload row has a non-numeric cell or the wrong column count."""


class EmptyTrial(AuditError):
    """Trial file contains no data rows."""


class OutOfRangeVoltage(AuditError):
    """Voltage outside the open interval (0, vref); channel is saturated
    or disconnected."""


class DegenerateSeries(AuditError):
    """Raw series has fewer than 2 samples or non-increasing time."""


class UnknownColumn(AuditError):
    """Referenced sensor column does not exist in the channel layout."""


class EmptyDataset(AuditError):
    """No parseable trials under the dataset root."""


class IoFailure(AuditError):
    """Filesystem write or read failed."""


# --- schedule -------------------------------------------------------------

class LabelMismatch(AuditError):
    """Label count differs from the session assignment."""


# --- drift metrics --------------------------------------------------------

class NoValidSamples(AuditError):
    """No valid pre-release samples for the requested sensor."""


class ZeroMean(AuditError):
    """Group mean is zero or negative; CV undefined."""


class InsufficientTrials(AuditError):
    """Fewer trials than the statistic requires."""


class EmptyGroup(AuditError):
    """Filters selected no trials."""


# --- probes ---------------------------------------------------------------

class WindowOutOfRange(AuditError):
    """Requested window does not lie within the trial duration."""


class LayoutMismatch(AuditError):
    """Feature matrices have different trial rows or column layout."""


class DegenerateData(AuditError):
    """Not enough rows/features to fit the decomposition."""


class SingleClass(AuditError):
    """Classifier training needs at least two classes."""


class NonFiniteFeature(AuditError):
    """Feature matrix contains NaN or infinity."""


class InsufficientClassTrials(AuditError):
    """Some class has too few trials for a stratified split."""


# --- curation -------------------------------------------------------------

class EmptySubset(AuditError):
    """Subset specification selects no trials."""
