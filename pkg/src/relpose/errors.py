"""Exception hierarchy.

Two families matter for the CLI exit codes: ``InputError`` (bad files or
field values, exit code 2) and ``InvariantViolation`` (data that parses but
breaks a documented contract, exit code 3).
"""

from __future__ import annotations


class RelposeError(Exception):
    """Base class for all toolkit errors."""


class InputError(RelposeError):
    """A problem with user-supplied input (files, flags, records)."""


class ParseError(InputError):
    """Malformed text input. Carries the source name and 1-based line number."""

    def __init__(self, message: str, source: str | None = None, line: int | None = None):
        self.source = source
        self.line = line
        where = ""
        if source is not None:
            where = f"{source}:"
        if line is not None:
            where += f"{line}: "
        elif source is not None:
            where += " "
        super().__init__(where + message)


class DuplicateImageId(ParseError):
    """An image id appears more than once in a COLMAP model."""


class NonFiniteValue(ParseError):
    """A parsed numeric field is NaN or infinite."""


class MissingKeypoints(InputError):
    """A requested image has no keypoints in the keypoint file."""


class IdMismatch(InputError):
    """Prediction and label pair ids do not line up."""


class InvalidFov(InputError):
    """Field of view outside the open interval (0, 180) degrees."""


class InvariantViolation(RelposeError):
    """Data violates a documented invariant."""


class DegenerateQuaternion(InvariantViolation):
    """Quaternion norm too small to normalize (<= 1e-12)."""


class DegenerateTranslation(InvariantViolation):
    """Translation norm too small for a direction to be defined."""


class NotARotation(InvariantViolation):
    """Matrix fails the orthonormality / determinant checks."""


class DegenerateLine(InvariantViolation):
    """Epipolar line coefficients vanish (the point is the epipole)."""


class EmptySequence(InvariantViolation):
    """An operation that needs frames received none."""


class SingleFrame(InvariantViolation):
    """An operation that needs at least two frames received one."""


class DimensionMismatch(InvariantViolation):
    """Feature dimension does not match the model."""


class EmptyBatch(InvariantViolation):
    """Loss/gradient requested for an empty batch."""


class EmptyInput(InvariantViolation):
    """Statistic requested for an empty sample set."""


class ZeroBaseline(InvariantViolation):
    """Percent change against a zero baseline."""
