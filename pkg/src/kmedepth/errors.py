"""Exception hierarchy.

Each class carries the process exit code the command-line front end uses
when the error escapes a subcommand.
"""


class KmeDepthError(Exception):
    exit_code = 1


class ConfigError(KmeDepthError, ValueError):
    exit_code = 2


class DataError(KmeDepthError, ValueError):
    exit_code = 3


class IncompatibleResponseError(DataError):
    """Variant/metric mismatch or differing evaluation grids."""


class DegenerateDataError(DataError):
    """Input carries no usable spread (all points identical, empty splits)."""


class NumericalError(KmeDepthError, ArithmeticError):
    exit_code = 4
