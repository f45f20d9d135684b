"""Exception hierarchy shared by every artikit module.

Each error carries an ``exit_code`` so the CLI can map failures onto its
documented exit status without a lookup table.
"""


class ArtikitError(Exception):
    exit_code = 3


class ValidationError(ArtikitError):
    exit_code = 3


class NumericError(ArtikitError):
    exit_code = 4


class MissingInput(ArtikitError):
    exit_code = 2


# artgrid
class DuplicateVoxel(ValidationError):
    pass


class OutOfBounds(ValidationError):
    pass


class InconsistentPart(ValidationError):
    pass


class BadChannelCount(ValidationError):
    pass


class DegenerateAxis(NumericError):
    pass


class FormatError(ValidationError):
    pass


# ingest
class ParseError(ValidationError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class UnknownLabel(ValidationError):
    pass


class BadJoint(ValidationError):
    pass


class DegenerateExtent(ValidationError):
    pass


class EmptyResult(ValidationError):
    pass


# kinematics
class OutOfRange(ValidationError):
    pass


class UnassignedPart(ValidationError):
    pass


# segment / eval
class EmptyGrid(ValidationError):
    pass


class EmptySet(ValidationError):
    pass


class NoMatch(ValidationError):
    pass


# numerics
class ShapeMismatch(ValidationError):
    pass


class EmptyMask(ValidationError):
    pass


class UnsupportedOp(ArtikitError):
    pass


# splat
class SizeMismatch(ValidationError):
    pass
