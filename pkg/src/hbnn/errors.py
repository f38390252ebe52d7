"""Error types shared across the package.

Two failure families are distinguished so callers (and the CLI exit-code
mapping) can tell bad usage apart from numerical breakdown.
"""


class UsageError(ValueError):
    """Invalid arguments: wrong shapes, mismatched spaces, bad config values."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values or hit a degenerate denominator."""
