"""Exception hierarchy shared across the guardian packages."""


class GuardianError(Exception):
    """Base class for all guardian errors."""


class ConfigurationError(GuardianError):
    """Invalid cluster spec or run configuration."""


class TargetError(GuardianError):
    """A fault or command referenced a host/pod/index that does not exist."""


class UnsupportedCommandError(GuardianError):
    """A host command outside the emulated set was requested.

    Distinct from a safety denial, which happens before execution.
    """


class RequestError(GuardianError):
    """Malformed or disallowed simulated Elasticsearch API request."""


class NotFoundError(GuardianError):
    """kubectl referenced an unknown resource."""


class ProbeUnavailableError(GuardianError):
    """Latency probes cannot run while the cluster is RED."""


class InsufficientDataError(GuardianError):
    """A series had fewer points than the model requires."""


class DegenerateSeriesError(GuardianError):
    """All timestamps in a series are identical; no trend is defined."""


class FitError(GuardianError):
    """Coefficient fitting failed (too few points or rank-deficient design)."""


class CalibrationRefusedError(GuardianError):
    """Calibration requires a GREEN cluster."""


class ProtocolError(GuardianError):
    """An investigator proposed a tool outside the closed tool set."""


class PersistenceError(GuardianError):
    """Incident memory could not be written."""
