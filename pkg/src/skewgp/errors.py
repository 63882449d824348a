"""Exception types shared across the package.

The CLI maps these onto exit codes: InputError -> 2, NumericError -> 3.
"""


class SkewGPError(Exception):
    """Base class for all package errors."""


class InputError(SkewGPError):
    """Invalid user input: shape mismatches, bad labels, malformed configs."""


class NumericError(SkewGPError):
    """Numerical failure: indefinite matrices, CDF evaluation breakdown."""
