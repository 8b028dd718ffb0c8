"""Exception hierarchy shared across the package.

The CLI maps these onto its exit-code contract: ArgumentError -> 2,
DataError -> 3, VerificationError -> 1.
"""


class SaferError(Exception):
    """Base class for all errors raised by this package."""


class ArgumentError(SaferError, ValueError):
    """A caller-supplied argument violates a precondition."""


class SelectorError(ArgumentError):
    """A layer selector matched no tensors."""


class AmbiguousOrientationError(ArgumentError):
    """A square weight matches the embedding dim on both axes; orientation must be explicit."""


class DataError(SaferError):
    """Input data (usually a file) is missing, malformed, or inconsistent."""


class FormatError(DataError):
    """A container file does not conform to the expected format."""


class IntegrityError(DataError):
    """A container file parses but its payload or invariants are broken."""


class DegenerateSpectrumError(DataError):
    """The singular spectrum admits no dominant direction (e.g. zero matrix)."""


class VerificationError(SaferError):
    """A behavioral verification check failed.

    Carries the names of the offending tensors when applicable.
    """

    def __init__(self, message, failures=()):
        super().__init__(message)
        self.failures = list(failures)
