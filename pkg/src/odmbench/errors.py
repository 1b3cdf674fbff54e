"""Exception types shared across the package."""


class OdmbenchError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(OdmbenchError, ValueError):
    """An input violates an operation precondition."""


class SingularMatrixError(OdmbenchError, ArithmeticError):
    """A pivot fell below the singularity threshold during inversion."""


class DomainError(OdmbenchError, ValueError):
    """Kernel input lies outside the mathematical domain (e.g. ln of x <= 0)."""


class MalformedPayloadError(OdmbenchError, ValueError):
    """A wire payload does not conform to its codec format."""


class ConfigError(OdmbenchError, ValueError):
    """An experiment configuration is invalid; the message names the line."""


class IncompleteGridError(OdmbenchError, ValueError):
    """A swept (op, size, codec, rate) cell is missing from the records."""


class InsufficientDataError(OdmbenchError, ValueError):
    """Too few samples for the requested statistic."""


class UndefinedRatioError(OdmbenchError, ZeroDivisionError):
    """The denominator of a ratio metric is zero."""


class OffloadUnreachableError(OdmbenchError, ConnectionError):
    """Transport-level failure while talking to the offload server."""


class ProxyUnreachableError(OdmbenchError, ConnectionError):
    """Transport-level failure while talking to the shaping proxy."""


class RemoteError(OdmbenchError, RuntimeError):
    """The offload server answered with a non-200 status."""

    def __init__(self, status: int, detail: str):
        super().__init__(f"server returned {status}: {detail}")
        self.status = status
        self.detail = detail
