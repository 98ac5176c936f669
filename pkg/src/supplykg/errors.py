"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: InputError -> 2, NumericalError -> 3,
CompatibilityError -> 4.
"""


class SupplyKGError(Exception):
    """Base class for all package errors."""


class InputError(SupplyKGError):
    """Malformed files, invalid configuration, or unknown tags."""


class NumericalError(SupplyKGError):
    """Non-finite values where finite numbers are required (e.g. training loss)."""


class CompatibilityError(SupplyKGError):
    """Checkpoint, graph, and config shapes disagree."""
