"""
Errors
------

Errors that can be raised by the home model, the endorsement machinery, the spec toolkit
and the record table I/O.
"""

from __future__ import annotations

from pathlib import Path

# ----- Main Exception to Inherit From ----- #


class EndorsementError(Exception):
    """
    Raised when an issue is detected in the platform, its configuration or its inputs.
    """


# ----- Home Model ----- #


class DuplicateIdError(EndorsementError):
    """Raised when registering a device whose id is already registered."""

    def __init__(self, device_id: str) -> None:
        errmsg = f"A device with id '{device_id}' is already registered."
        super().__init__(errmsg)


class UnknownDeviceTypeError(EndorsementError):
    """Raised when a device type is not present in the loaded device catalog."""

    def __init__(self, device_type: str) -> None:
        errmsg = f"Unknown device type: '{device_type}'"
        super().__init__(errmsg)


class UnknownIdError(EndorsementError):
    """Raised when no device is registered under the given id."""

    def __init__(self, device_id: str) -> None:
        errmsg = f"No device registered with id '{device_id}'"
        super().__init__(errmsg)


class UnknownAhoError(EndorsementError):
    """Raised when an abstract home object is not defined in the home."""

    def __init__(self, name: str) -> None:
        errmsg = f"Unknown abstract home object: '{name}'"
        super().__init__(errmsg)


class UnknownAttributeError(EndorsementError):
    """Raised when a device type does not declare the requested attribute."""

    def __init__(self, device_type: str, attribute: str) -> None:
        errmsg = f"Device type '{device_type}' has no attribute '{attribute}'"
        super().__init__(errmsg)


class UnknownValueError(EndorsementError):
    """Raised when a value lies outside of the value domain of its object."""

    def __init__(self, subject: str, value: object) -> None:
        errmsg = f"Value '{value}' is not in the domain of '{subject}'"
        super().__init__(errmsg)


# ----- State Machine & Platform ----- #


class NonMonotonicTimestampError(EndorsementError):
    """Raised when a state change is older than the last recorded one for the same pair."""

    def __init__(self, device_id: str, attribute: str, timestamp: int, last: int) -> None:
        errmsg = (
            f"State change for '{device_id}.{attribute}' at t={timestamp} ms is older "
            f"than the last recorded change at t={last} ms"
        )
        super().__init__(errmsg)


class UnknownVerbError(EndorsementError):
    """Raised when a physical interaction is not defined for a device type."""

    def __init__(self, device_type: str, verb: str) -> None:
        errmsg = f"Device type '{device_type}' defines no interaction '{verb}'"
        super().__init__(errmsg)


class DeviceOfflineError(EndorsementError):
    """Raised when physically interacting with an offline device."""

    def __init__(self, device_id: str) -> None:
        errmsg = f"Device '{device_id}' is offline"
        super().__init__(errmsg)


class CascadeDepthExceededError(EndorsementError):
    """Raised when routines keep triggering each other beyond the allowed depth."""

    def __init__(self, routine_id: str, depth: int) -> None:
        errmsg = f"Routine '{routine_id}' would fire at cascade depth {depth}, aborting automation cascade"
        super().__init__(errmsg)


class InvalidRequestError(EndorsementError):
    """Raised when a state change request is malformed."""


class ConfigurationError(EndorsementError):
    """Raised when a configuration, catalog, template or inference file is invalid."""


# ----- Spec Toolkit ----- #


class SourceParseError(EndorsementError):
    """Raised when a device-attribute source file cannot be parsed in its declared format."""

    def __init__(self, path: Path | str, line: int, column: int, reason: str) -> None:
        self.path = Path(path)
        self.line = line
        self.column = column
        errmsg = f"Could not parse {self.path.name} at line {line}, column {column}: {reason}"
        super().__init__(errmsg)


class ConflictingTrustClassError(EndorsementError):
    """Raised when sources disagree on the writability of a pair and no override resolves it."""

    def __init__(self, pair: str, first: str, second: str) -> None:
        errmsg = f"Sources disagree on the trust class of '{pair}': {first} vs {second}"
        super().__init__(errmsg)


class MixedTargetError(EndorsementError):
    """Raised when generating templates from inferences targeting different (aho, value)."""

    def __init__(self, targets: set[str]) -> None:
        errmsg = f"Inferences target more than one (aho, value): {sorted(targets)}"
        super().__init__(errmsg)


# ----- Scenarios ----- #


class ScriptParseError(EndorsementError):
    """Raised when a scenario script line does not follow the script grammar."""

    def __init__(self, line_number: int, line: str, reason: str) -> None:
        self.line_number = line_number
        errmsg = f"Line {line_number}: {reason} -> '{line.strip()}'"
        super().__init__(errmsg)


# ----- Record Tables ----- #


class TableFormatError(EndorsementError):
    """Raised when an issue is detected in a record table file or frame."""
