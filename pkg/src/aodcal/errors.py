"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: InputError -> 1, NumericalError -> 2.
"""


class AodcalError(Exception):
    """Base class for package errors."""


class InputError(AodcalError):
    """Bad user input: malformed CSV, invalid config, inconsistent data."""


class NumericalError(AodcalError):
    """Numerical failure: factorization breakdown, divergent chain."""
