"""Exception hierarchy.

Every error carries an ``exit_code`` used by the CLI: 2 for configuration
problems, 3 for bad input data, 4 for internal failures.
"""


class LesionDistError(Exception):
    exit_code = 4


class ConfigError(LesionDistError):
    exit_code = 2


class DataError(LesionDistError):
    exit_code = 3


class InternalError(LesionDistError):
    exit_code = 4


# grid container / dot files
class BadMagic(DataError):
    pass


class UnsupportedVersion(DataError):
    pass


class Truncated(DataError):
    pass


class NonFiniteValue(DataError):
    def __init__(self, index):
        self.index = tuple(int(i) for i in index)
        super().__init__(f"non-finite value at index {self.index}")


class IoFailure(DataError):
    pass


class ParseError(DataError):
    def __init__(self, line, detail=""):
        self.line = line
        super().__init__(f"line {line}: {detail}" if detail else f"line {line}")


class WrongArity(DataError):
    def __init__(self, line, expected, got):
        self.line = line
        super().__init__(f"line {line}: expected {expected} columns, got {got}")


class DuplicateDot(DataError):
    def __init__(self, coord):
        self.coord = tuple(coord)
        super().__init__(f"duplicate dot {self.coord}")


class OutOfBounds(DataError):
    pass


# algorithms
class EmptyDotSet(DataError):
    pass


class DidNotConverge(InternalError):
    def __init__(self, max_passes):
        self.max_passes = max_passes
        super().__init__(f"raster scan did not converge within {max_passes} passes")


class NonPositiveDecay(ConfigError):
    pass


class NonPositiveMax(DataError):
    pass


class NoAnnotations(DataError):
    pass


class NoImages(DataError):
    pass


class EmptyCurve(DataError):
    pass


class PlacementFailure(DataError):
    pass


class StageError(LesionDistError):
    """Wraps an error raised inside a pipeline stage, tagged with the stage name."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 4)
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
