"""Exception hierarchy shared by the solvers, verifiers and the CLI.

The CLI maps :class:`ParameterError` to exit code 2, :class:`SolverError`
to exit code 3 and :class:`VerificationFailed` to exit code 4.
"""


class EzHestonError(Exception):
    """Base class for all package errors."""


class ParameterError(EzHestonError, ValueError):
    """Invalid parameters or configuration."""


class SolverError(EzHestonError, ArithmeticError):
    """A solver could not produce an admissible solution."""


class NoRealRoot(SolverError):
    pass


class NoAdmissibleRoot(SolverError):
    pass


class NonConvergence(SolverError):
    pass


class ComplexA4(SolverError):
    pass


class StepRejected(SolverError):
    pass


class InstabilityDetected(SolverError):
    pass


class GridMismatch(SolverError):
    pass


class DomainError(EzHestonError, ValueError):
    """Argument outside the domain of a formula (e.g. log of a negative)."""


class VerificationFailed(EzHestonError):
    """Raised by callers that want a hard failure from a verification report."""
