"""Exception types raised across the package."""


class QfhpoError(Exception):
    """Base class for all package errors."""


class CapacityError(QfhpoError, ValueError):
    """Requested qubit count exceeds what the statevector engine supports."""


class GateIndexError(QfhpoError, IndexError):
    """A gate refers to a qubit that does not exist (or control == target)."""


class DomainError(QfhpoError, ValueError):
    """A value lies outside the domain an operation accepts."""


class IncompleteAssignmentError(QfhpoError, KeyError):
    """A hyperparameter assignment is missing one or more dimensions."""


class ShapeError(QfhpoError, ValueError):
    """Array dimensions do not match the model they are used with."""


class NumericalError(QfhpoError, ArithmeticError):
    """A computation produced a non-finite value."""


class ConfigError(QfhpoError, ValueError):
    """A configuration file or checkpoint is invalid or inconsistent."""
