"""Exception types raised across the pipeline.

Everything derives from JvaError so callers can catch pipeline failures
in one clause while still matching specific conditions.
"""

from __future__ import annotations


class JvaError(Exception):
    """Base class for all pipeline errors."""


class MalformedRow(JvaError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class NonMonotonicTimestamp(JvaError):
    def __init__(self, line: int, reason: str = "timestamp does not strictly increase"):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class UnknownFormat(JvaError):
    pass


class BehindCamera(JvaError):
    """Gaze direction points behind the camera (dz <= 0)."""


class DecodeError(JvaError):
    pass


class MissingTimestampInName(JvaError):
    pass


class GazeOutOfFrame(JvaError):
    pass


class WindowTooLarge(JvaError):
    pass


class NoFramesFound(JvaError):
    pass


class ZeroVector(JvaError):
    """Descriptor came out identically zero (all-black uniform window)."""


class MissingEmbedding(JvaError):
    def __init__(self, timestamp: int):
        self.timestamp = timestamp
        super().__init__(f"no embedding for timestamp {timestamp}")


class DimensionMismatch(JvaError):
    pass


class InsufficientSamples(JvaError):
    pass


class MixedUnits(JvaError):
    """Saccade amplitudes in incompatible units were combined."""


class TooFewEvents(JvaError):
    pass


class EmptySeries(JvaError):
    pass


class InvalidSpec(JvaError):
    pass


class SpanMismatch(JvaError):
    pass


class ConfigError(JvaError):
    pass


class SerializationError(JvaError):
    pass
