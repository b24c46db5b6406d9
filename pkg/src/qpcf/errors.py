"""Exception hierarchy shared across modules."""


class QpcfError(Exception):
    """Base class for all domain and input errors raised by the package."""


class InputError(QpcfError, ValueError):
    """Malformed or inconsistent input data."""


class NumericalError(QpcfError, ArithmeticError):
    """A numerical routine failed to reach its tolerance."""
