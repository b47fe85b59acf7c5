"""Exception hierarchy shared across the toolkit.

Exit-code mapping used by the service and CLI: ``ConfigError`` -> 1,
``RuntimeFailure`` (and unexpected exceptions) -> 2, ``NumericalError`` -> 3.
"""


class FacerepError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(FacerepError):
    """Invalid configuration or malformed input arguments."""


class InputError(FacerepError):
    """A well-formed call received data violating an operation's contract."""


class RuntimeFailure(FacerepError):
    """A pipeline step failed at runtime (missing file, bad state, ...)."""


class NumericalError(FacerepError):
    """Non-finite values or numerically degenerate inputs."""


class SingularityError(NumericalError):
    """Degenerate geometry: non-invertible transform or collapsed points."""
