"""Exception types raised by leaf_uptake.

Every exception carrying extra attributes defines ``__reduce__`` so it
survives the trip back from a sweep worker process.
"""

from typing import Iterable, Optional, Tuple


class DomainError(ValueError):
    """Input lies outside the domain of a formula or model."""


class DatasetError(ValueError):
    """Dataset failed schema or value validation."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.message = message
        self.row = row
        super().__init__(f"row {row}: {message}" if row is not None else message)

    def __reduce__(self):
        return (type(self), (self.message, self.row))


class MissingDataError(LookupError):
    """One or more (compound, compartment, time) keys are absent from a dataset."""

    def __init__(self, keys: Iterable[Tuple[str, str, float]]):
        self.keys = list(keys)
        listed = ", ".join(f"({c}, {p}, t={t:g})" for c, p, t in self.keys)
        super().__init__(f"missing dataset rows: {listed}")

    def __str__(self) -> str:
        return self.args[0]

    def __reduce__(self):
        return (type(self), (self.keys,))


class SolverError(RuntimeError):
    """Time integration produced an unstable, negative or non-finite state."""

    def __init__(self, message: str, step: Optional[int] = None, member: Optional[int] = None):
        self.step = step
        self.member = member
        super().__init__(message)

    def __reduce__(self):
        return (type(self), (self.args[0], self.step, self.member))


class SweepCellError(SolverError):
    """A sweep cell failed; carries the cell's (alpha, sigma) coordinates."""

    def __init__(self, alpha: float, sigma: float, cause: SolverError):
        self.alpha = alpha
        self.sigma = sigma
        self.cause = cause
        super().__init__(
            f"sweep cell (alpha={alpha:g}, sigma={sigma:g}) failed: {cause}",
            step=cause.step,
            member=cause.member,
        )

    def __reduce__(self):
        return (type(self), (self.alpha, self.sigma, self.cause))
