"""Exception hierarchy shared by every DataRing module."""


class DataRingError(Exception):
    """Base class; the CLI maps any subclass to a non-zero exit."""

    code = "error"


class ConfigurationError(DataRingError, ValueError):
    code = "config"


class DecodeOverflow(DataRingError):
    """Plaintext of a ciphertext lies outside the decode window."""

    code = "decode-overflow"


class ProtocolError(DataRingError):
    code = "protocol"


class BackgroundKnowledgeTooSmall(DataRingError):
    """No threshold r0 in [1, L] keeps honest rejection below eta."""

    code = "background-too-small"


class TargetUnattainable(DataRingError):
    code = "target-unattainable"


class BudgetExhausted(DataRingError):
    code = "budget-exhausted"


class DomainError(DataRingError, ValueError):
    """A record or label does not belong to the public domain."""

    code = "domain"

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row
