"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: validation problems exit 1, server/IO
problems exit 2, and a failed leak sweep exits 3.
"""


class PinaliteError(Exception):
    """Base class for all toolkit errors."""


class DocumentError(PinaliteError):
    """A document (screen, script, trace, app, config) violates its schema.

    Carries the path of the offending field when known, e.g. "root.children[2].class".
    """

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{message} (at {path})" if path else message)


class QuerySyntaxError(PinaliteError):
    """Query text failed to parse; ``position`` is a character offset."""

    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} (at offset {position})")


class RecordingError(PinaliteError):
    """A demonstration event could not be turned into an operation."""


class SynthesisError(PinaliteError):
    """No personal-string-free query uniquely identifies the target element."""


class ServerUnavailable(PinaliteError):
    """The aggregation server could not be reached; sharing fails closed."""


class QuotaExceeded(PinaliteError):
    """A per-user request quota was exhausted; retry after the window slides."""

    def __init__(self, message: str, retry_after_s: float):
        self.retry_after_s = retry_after_s
        super().__init__(message)


class ClientBlocked(PinaliteError):
    """The user id was permanently blocked for abnormal request volume."""


class StateFileError(PinaliteError):
    """Persisted server state is corrupt; the server refuses to start."""


class LeakDetected(PinaliteError):
    """The final byte sweep found personal plaintext in an output artifact."""


class GenerationError(PinaliteError):
    """Synthetic population generation could not satisfy its uniqueness rules."""


class ExecutionError(PinaliteError):
    """A script could not be executed against the simulated app."""
