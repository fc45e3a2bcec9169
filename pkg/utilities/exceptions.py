"""
This Source Code Form is subject to the terms of the Mozilla Public
License, v. 2.0. If a copy of the MPL was not distributed with this
file, You can obtain one at http://mozilla.org/MPL/2.0/.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

from .constants import EXIT_DATA_ERROR, EXIT_NUMERICAL_ERROR, EXIT_USAGE_ERROR

if TYPE_CHECKING:
    from sentry_sdk.types import Event, Hint

    from .containers.fits import RestrictedFit

__all__ = (
    "ConvergenceError",
    "DataError",
    "DegeneracyError",
    "DomainError",
    "EmptySummaryError",
    "FactorizationError",
    "RankError",
    "RaoError",
    "StructuralError",
    "ValidityError",
    "sentry_before_send",
)


def sentry_before_send(event: Event, hint: Hint) -> Event | None:
    if "exc_info" in hint:
        _, exc_value, _ = hint["exc_info"]
        # bad input files and flags are the user's problem, not ours.
        if isinstance(exc_value, (DataError, DomainError, StructuralError)):
            return None

        return event

    return None


class RaoError(Exception):
    """Base for every error raised by this package."""

    exit_code: int = EXIT_NUMERICAL_ERROR


class StructuralError(RaoError, ValueError):
    """A matrix or vector does not have the shape or symmetry an operation requires."""

    exit_code = EXIT_DATA_ERROR


class DomainError(RaoError, ValueError):
    """A scalar argument lies outside the interval an operation is defined on."""

    exit_code = EXIT_USAGE_ERROR


class FactorizationError(RaoError, ArithmeticError):
    """A covariance or correlation matrix is not positive definite."""


class DegeneracyError(RaoError, ArithmeticError):
    """The sample cannot support the requested computation (zero variance, all mass downweighted, ...)."""


class RankError(RaoError, ArithmeticError):
    """The Pearson correlation matrix is singular, which the likelihood-ratio baseline cannot handle."""


class ValidityError(RaoError, ArithmeticError):
    """A converged estimate left the parameter space the test statistic is defined on."""


class EmptySummaryError(RaoError, ValueError):
    """A Monte-Carlo summary or calibration was requested over no data."""

    exit_code = EXIT_USAGE_ERROR


class DataError(RaoError, ValueError):
    __slots__ = ("line",)

    exit_code = EXIT_DATA_ERROR

    def __init__(self, *args: Any, line: int | None = None, **kwargs: Any) -> None:
        super().__init__(*args, **kwargs)
        self.line: int | None = line


class ConvergenceError(RaoError, ArithmeticError):
    __slots__ = ("fit", "trace")

    def __init__(self, fit: RestrictedFit, *args: Any, **kwargs: Any) -> None:
        super().__init__(*args, **kwargs)
        self.fit: RestrictedFit = fit
        self.trace: tuple[float, ...] = fit.trace
