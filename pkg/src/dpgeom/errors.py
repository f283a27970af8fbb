"""Exception types shared across the package.

The command-line front end maps these onto exit codes: :class:`InputError`
to 2, :class:`DomainError` to 3 and :class:`ConvergenceError` to 4.
"""

from __future__ import annotations


class InputError(ValueError):
    """Malformed input: non-finite numbers, wrong shapes, dimension mismatch."""


class DomainError(ValueError):
    """Well-formed input outside an operation's mathematical domain."""


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before certifying its tolerance."""

    def __init__(self, message: str, gap: float, iterations: int):
        super().__init__(f"{message} (gap={gap:.3e} after {iterations} iterations)")
        self.gap = gap
        self.iterations = iterations
