"""Exception hierarchy shared by every module."""


class RobustFOError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(RobustFOError, ValueError):
    pass


class UnstableSystemError(RobustFOError):
    pass


class NotPSDError(RobustFOError, ValueError):
    pass


class DegenerateInputError(RobustFOError, ValueError):
    pass


class DegenerateOptimumError(RobustFOError):
    """The exact l2 regularizer is undefined because the min-max optimum is u = 0."""


class IllPosedError(RobustFOError):
    pass


class ConvergenceError(RobustFOError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class RankDeficientError(RobustFOError):
    pass


class InvalidTopologyError(RobustFOError, ValueError):
    pass


class BoundInapplicableError(RobustFOError):
    """The ISS bound needs a contracting gain matrix (c_M < 1)."""


class ConfigError(RobustFOError):
    """Invalid scenario configuration; ``path`` is a JSON path such as ``$.controller.eta``."""

    def __init__(self, path, message, line=None):
        self.path = path
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{path}: {message}")
