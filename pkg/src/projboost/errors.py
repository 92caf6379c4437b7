"""Exception taxonomy shared across the library.

The CLI maps these onto exit codes: DataError -> 2, NumericError -> 3.
"""


class DataError(Exception):
    """Malformed, inconsistent, or empty input data."""


class NumericError(Exception):
    """Numerical failure: solver breakdown, non-finite values, singular systems."""
