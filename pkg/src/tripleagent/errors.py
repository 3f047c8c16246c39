class TripleAgentError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(TripleAgentError, ValueError):
    """A function was called outside its preconditions."""


class InvariantViolation(TripleAgentError):
    pass


class ParseError(TripleAgentError):
    """Malformed input document; ``locus`` names the offending line or field."""

    def __init__(self, message: str, locus: str | None = None):
        self.locus = locus
        super().__init__(f"{locus}: {message}" if locus else message)


class ControllerError(TripleAgentError):
    pass


class CampaignAborted(ControllerError):
    """The target could not be brought back to a healthy state."""


class IntegrityError(TripleAgentError):
    def __init__(self, message: str, records: list | None = None):
        self.records = records or []
        super().__init__(message)
