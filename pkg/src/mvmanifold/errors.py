"""Exception hierarchy shared by all modules.

Every exception carries an ``exit_code`` so the CLI can map failures to a
category without inspecting messages.
"""


class MVManifoldError(Exception):
    exit_code = 1


class DatasetError(MVManifoldError, ValueError):
    exit_code = 3


class AlignmentError(DatasetError):
    """Views (or labels) disagree on the number of samples."""


class ParseError(DatasetError):
    def __init__(self, path, row, column, message):
        self.path = path
        self.row = row
        self.column = column
        super().__init__(f"{path}: row {row}, column {column}: {message}")


class CapacityError(DatasetError):
    """More samples requested from a cluster than it holds."""


class ConfigurationError(MVManifoldError, ValueError):
    exit_code = 2


class NumericalError(MVManifoldError, ArithmeticError):
    exit_code = 4


class DegenerateInputError(NumericalError):
    pass


class CalibrationError(NumericalError):
    pass


class OptimizationError(NumericalError):
    def __init__(self, iteration, message="non-finite embedding coordinates"):
        self.iteration = iteration
        super().__init__(f"iteration {iteration}: {message}")


class UndefinedMetricError(NumericalError):
    pass
