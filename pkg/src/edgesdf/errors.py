"""Exception types raised across the package."""


class EdgeSDFError(Exception):
    """Base class for all package errors."""


class ConfigError(EdgeSDFError, ValueError):
    """Invalid configuration or mismatched dimensions."""


class DataFormatError(EdgeSDFError, ValueError):
    """A file could not be parsed; carries the offending line when known."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class NumericalError(EdgeSDFError, FloatingPointError):
    """Non-finite values encountered where finite ones are required."""


class TapeMismatchError(EdgeSDFError):
    """A jet tape was replayed against parameters it was not recorded with."""


class TrainingDiverged(NumericalError):
    """Training produced a non-finite loss."""

    def __init__(self, step, breakdown):
        super().__init__(f"non-finite loss at step {step}: {breakdown}")
        self.step = step
        self.breakdown = breakdown
