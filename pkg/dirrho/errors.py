"""Exception hierarchy for dirrho."""


class DirRhoError(Exception):
    """Base class for every error raised by dirrho."""


class DomainError(DirRhoError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DataValidationError(DirRhoError, ValueError):
    """Input data failed validation.

    Args:
        message (str): Description of the problem
        row (int): 1-based data row of the offending cell, if known
        column (str or int): Column name or index of the offending cell, if known
    """

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


class IntegrationError(DirRhoError, ArithmeticError):
    """Numerical integration failed or missed its error target."""


class ConfigError(DirRhoError):
    """Settings, presets or family specifications are malformed."""
