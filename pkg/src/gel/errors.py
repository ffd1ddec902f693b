"""Exception hierarchy shared across the package.

Every error raised by the library derives from GelError so callers (and the
command line front end) can distinguish our failures from genuine bugs.
"""


class GelError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(GelError):
    """Operands or inputs have incompatible shapes."""


class DomainError(GelError):
    """A value lies outside the mathematical domain of an operation."""


class ContractError(GelError):
    """An argument violates a documented precondition or invariant."""


class ParseError(GelError):
    """An input file is malformed; the message names file and line."""


class MetricError(GelError):
    """An evaluation metric is undefined for the given inputs."""


class NumericalAbort(GelError):
    """Training hit a non-finite quantity and stopped.

    Carries the epoch index and the name of the offending term so the
    failure can be reported precisely.
    """

    def __init__(self, epoch: int, term: str):
        self.epoch = epoch
        self.term = term
        super().__init__(
            f"non-finite value in '{term}' at epoch {epoch}; training aborted"
        )
