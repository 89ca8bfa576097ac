"""Exception hierarchy. Each family carries the CLI exit code it maps to."""


class PipelineError(Exception):
    exit_code = 1


class ValidationError(PipelineError):
    """Bad configuration or arguments, detected before any stage runs."""

    exit_code = 2


class DataError(PipelineError):
    exit_code = 3


class FormatError(DataError):
    pass


class EmptyInputError(DataError):
    pass


class SplitError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class DegenerateDataError(DataError):
    pass


class ShapeError(DataError, ValueError):
    pass


class NumericError(PipelineError):
    exit_code = 4


class DivergenceError(NumericError):
    def __init__(self, message, epoch=None):
        if epoch is not None:
            message = f"{message} (epoch {epoch})"
        super().__init__(message)
        self.epoch = epoch


class ConvergenceError(NumericError):
    def __init__(self, message, residual=None):
        if residual is not None:
            message = f"{message} (residual KKT violation {residual:.3g})"
        super().__init__(message)
        self.residual = residual


class TrainingError(PipelineError, ValueError):
    exit_code = 3
