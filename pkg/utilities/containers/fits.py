"""
This Source Code Form is subject to the terms of the Mozilla Public
License, v. 2.0. If a copy of the MPL was not distributed with this
file, You can obtain one at http://mozilla.org/MPL/2.0/.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any, NamedTuple

from utilities.constants import DEFAULT_DAMPING, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE
from utilities.exceptions import DomainError

if TYPE_CHECKING:
    from typing import Self

    from utilities._types.config import FitSection
    from utilities.flags import HypothesisKind
    from utilities.matrix_ops import FloatArray

__all__ = ("FitConfig", "RestrictedFit")


class FitConfig(NamedTuple):
    tolerance: float = DEFAULT_TOLERANCE
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    damping: float = DEFAULT_DAMPING

    def validate(self) -> Self:
        if not self.tolerance > 0:
            raise DomainError(f"fit tolerance must be positive, got {self.tolerance!r}.")
        if self.max_iterations < 1:
            raise DomainError(f"max_iterations must be at least 1, got {self.max_iterations!r}.")
        if not 0 < self.damping <= 1:
            raise DomainError(f"damping must lie in (0, 1], got {self.damping!r}.")
        return self

    @classmethod
    def from_section(cls, section: FitSection | None, /, **overrides: Any) -> Self:
        values: dict[str, Any] = dict(section or {})
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(
            tolerance=float(values.get("tolerance", DEFAULT_TOLERANCE)),
            max_iterations=int(values.get("max_iterations", DEFAULT_MAX_ITERATIONS)),
            damping=float(values.get("damping", DEFAULT_DAMPING)),
        ).validate()


class RestrictedFit(NamedTuple):
    """Restricted minimum-DPD estimates of (μ, σ²) and, for the free equicorrelation null, ρ.

    ``r0`` is the null correlation matrix the weights were computed under; for the free
    equicorrelation null that is ``R(ρ̃)``. ``trace`` holds the maximal relative change per iteration.
    """

    kind: HypothesisKind
    beta: float
    mu_tilde: FloatArray
    sigma2_tilde: FloatArray
    r_tilde: FloatArray
    r0: FloatArray
    rho_tilde: float | None
    kappa0_tilde: float
    weights: FloatArray
    iterations: int
    converged: bool
    residual: float
    trace: tuple[float, ...]

    def __repr__(self) -> str:
        return (
            f"<RestrictedFit kind={self.kind.value!r} beta={self.beta} p={self.p} iterations={self.iterations} "
            f"converged={self.converged}>"
        )

    @property
    def n(self) -> int:
        return self.weights.size

    @property
    def p(self) -> int:
        return self.mu_tilde.size

    @property
    def min_weight(self) -> float:
        return float(self.weights.min())

    @property
    def effective_n(self) -> float:
        """Kish effective sample size of the DPD weights."""
        return float(self.weights.sum() ** 2 / (self.weights**2).sum())

    def summary(self) -> dict[str, Any]:
        return {
            "mu": self.mu_tilde.tolist(),
            "sigma2": self.sigma2_tilde.tolist(),
            "r_tilde": self.r_tilde.tolist(),
            "rho": self.rho_tilde,
            "kappa0": self.kappa0_tilde,
            "iterations": self.iterations,
            "converged": self.converged,
            "residual": self.residual,
            "min_weight": self.min_weight,
            "effective_n": self.effective_n,
        }
