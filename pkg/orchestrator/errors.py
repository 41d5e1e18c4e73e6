"""Error hierarchy shared by every stage of the experiment pipeline"""
from typing import Optional


class ExperimentError(ValueError):
    """Base class; `exit_code` is what the CLI returns for this failure."""
    exit_code = 1


class ConfigurationError(ExperimentError):
    exit_code = 1


class DataFormatError(ExperimentError):
    """Malformed dataset or checkpoint file."""
    exit_code = 2

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class InvalidAssignmentError(ExperimentError):
    """Observed-class assignment breaks the category-shift union condition."""
    exit_code = 2


class InfeasibleAssignmentError(ExperimentError):
    exit_code = 2


class ShapeError(ExperimentError):
    exit_code = 2


class ContractViolationError(ExperimentError):
    exit_code = 2


class NumericalError(ExperimentError):
    exit_code = 3

    def __init__(self, message: str, parameter_name: Optional[str] = None):
        self.parameter_name = parameter_name
        if parameter_name is not None:
            message = f"{message} (parameter '{parameter_name}')"
        super().__init__(message)
