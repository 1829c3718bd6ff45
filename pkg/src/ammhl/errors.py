"""Exception hierarchy.

Every error carries a short machine-readable ``code`` so the CLI can print
single-line records and map each family onto an exit status.
"""

from __future__ import annotations


class AmmhlError(Exception):
    """Base class for all library errors."""

    code = "error"
    exit_status = 3


class DomainError(AmmhlError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""

    code = "domain"
    exit_status = 2


class InsufficientReservesError(DomainError):
    """A trade would drain the pool's risky reserve."""

    code = "insufficient_reserves"


class ConfigError(AmmhlError, ValueError):
    code = "config"
    exit_status = 2


class PreconditionError(AmmhlError, ValueError):
    """A modelling assumption required by a solver does not hold."""

    code = "precondition"
    exit_status = 2


class CapabilityError(AmmhlError, NotImplementedError):
    """The requested (signal, solver) combination is not supported."""

    code = "capability"
    exit_status = 2


class WrongSolverError(CapabilityError):
    code = "wrong_solver"


class ConvergenceError(AmmhlError, ArithmeticError):
    code = "convergence"
    exit_status = 3


class ConsistencyError(AmmhlError, ArithmeticError):
    """An internal identity that must hold was violated numerically."""

    code = "consistency"
    exit_status = 3


class ShapeError(AmmhlError, ValueError):
    code = "shape"
    exit_status = 2
