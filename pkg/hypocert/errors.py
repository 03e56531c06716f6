"""
Error hierarchy for the hypocert toolkit.

Every error carries a JSON-ready ``record`` with the error name, a message,
the process exit code it maps to and any extra details the raiser attached.
"""
import json
import logging
from pathlib import Path

from hypocert.const import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_PRECONDITION, EXIT_SEARCH

_LOGGER = logging.getLogger(__name__)

_STRINGS: dict | None = None


def error_message(key: str) -> str:
    """Look up the human readable message for a configuration error key."""
    global _STRINGS
    if _STRINGS is None:
        path = Path(__file__).parent / "strings.json"
        _STRINGS = json.loads(path.read_text(encoding="utf-8"))
    return _STRINGS["config"]["error"].get(key, key)


class HypocertError(Exception):
    """Base class of every error raised by the toolkit."""

    exit_code: int = 1

    def __init__(self, message: str, **details) -> None:
        self.message = message
        self.details = details
        self.record = {
            "error": type(self).__name__,
            "message": message,
            "exit_code": self.exit_code,
            **details,
        }
        super().__init__(f"{type(self).__name__}: {message}")


class ConfigError(HypocertError):
    """Raised when a run configuration is malformed or violates an invariant."""

    exit_code = EXIT_CONFIG

    def __init__(self, key: str, message: str | None = None, **details) -> None:
        self.key = key
        super().__init__(message or error_message(key), key=key, **details)


class InvalidOperator(ConfigError):
    """Raised when B or Q do not describe a valid operator."""


class InvalidExponents(ConfigError):
    """Raised when the exponent input violates its hypotheses."""


class InvalidCutoff(ConfigError):
    """Raised when cutoff radii are not ordered."""


class InvalidRegion(ConfigError):
    """Raised when a pointwise region is too coarse or inconsistent."""


class NotControllable(HypocertError):
    """Raised when the Kalman rank condition fails."""

    exit_code = EXIT_PRECONDITION


class DegenerateExponent(HypocertError):
    """Raised when the exponent recursion leaves the positive range."""

    exit_code = EXIT_PRECONDITION


class IncompatibleSupports(HypocertError):
    """Raised when 1 - psi or psi' are not dominated by w on the sampled grid."""

    exit_code = EXIT_PRECONDITION


class GammaExhausted(HypocertError):
    """Raised when no scale parameter below the search cap passes the certificates."""

    exit_code = EXIT_SEARCH


class TailViolation(HypocertError):
    """Raised when a test function carries too much mass near the box boundary."""

    exit_code = EXIT_NUMERICAL


class DegenerateDomain(HypocertError):
    """Raised when a multiplier is evaluated where one of its denominators vanishes."""

    exit_code = EXIT_NUMERICAL


class DomainViolation(DegenerateDomain):
    """Raised when a ladder factor meets a zero denominator inside the previous support."""
