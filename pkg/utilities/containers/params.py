"""
This Source Code Form is subject to the terms of the Mozilla Public
License, v. 2.0. If a copy of the MPL was not distributed with this
file, You can obtain one at http://mozilla.org/MPL/2.0/.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
from scipy import linalg

from utilities.exceptions import DomainError, FactorizationError, StructuralError
from utilities.matrix_ops import validate_correlation

if TYPE_CHECKING:
    from typing import Self

    import numpy.typing as npt

    from utilities.matrix_ops import FloatArray

__all__ = ("GaussianParams",)


class GaussianParams:
    """Mean, variances and correlation of a p-variate normal, with ``Σ = Λ^{1/2} R Λ^{1/2}``.

    Arrays are stored read-only. The Cholesky factor of ``Σ`` is computed once on construction,
    so an instance that exists is known to be positive definite.
    """

    __slots__ = ("_chol", "_log_det", "corr", "mu", "sigma2")

    def __init__(self, mu: npt.ArrayLike, sigma2: npt.ArrayLike, corr: npt.ArrayLike) -> None:
        mu_ = np.array(mu, dtype=np.float64, ndmin=1)
        sigma2_ = np.array(sigma2, dtype=np.float64, ndmin=1)
        if mu_.ndim != 1 or sigma2_.shape != mu_.shape:
            raise StructuralError(f"mean and variances must be vectors of one length, got {mu_.shape} and {sigma2_.shape}.")
        if np.any(~np.isfinite(sigma2_)) or np.any(sigma2_ <= 0):
            raise DomainError("variances must be strictly positive.")

        corr_ = validate_correlation(np.atleast_2d(corr))
        if corr_.shape != (mu_.size, mu_.size):
            raise StructuralError(f"correlation matrix is {corr_.shape}, expected order {mu_.size}.")

        sd = np.sqrt(sigma2_)
        sigma = corr_ * np.outer(sd, sd)
        try:
            chol = linalg.cholesky(sigma, lower=True)
        except linalg.LinAlgError as exc:
            raise FactorizationError("covariance matrix is not positive definite.") from exc

        for array in (mu_, sigma2_, corr_, chol):
            array.setflags(write=False)

        self.mu: FloatArray = mu_
        self.sigma2: FloatArray = sigma2_
        self.corr: FloatArray = corr_
        self._chol: FloatArray = chol
        self._log_det: float = 2.0 * float(np.sum(np.log(np.diag(chol))))

    def __repr__(self) -> str:
        return f"<GaussianParams p={self.p} mu={self.mu.tolist()!r} sigma2={self.sigma2.tolist()!r}>"

    @classmethod
    def from_covariance(cls, mu: npt.ArrayLike, sigma: npt.ArrayLike) -> Self:
        s = np.asarray(sigma, dtype=np.float64)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise StructuralError(f"covariance must be square, got shape {s.shape}.")
        variances = np.diag(s).copy()
        if np.any(variances <= 0):
            raise DomainError("covariance diagonal must be strictly positive.")
        sd = np.sqrt(variances)
        return cls(mu, variances, s / np.outer(sd, sd))

    @classmethod
    def standard(cls, p: int) -> Self:
        return cls(np.zeros(p), np.ones(p), np.eye(p))

    @property
    def p(self) -> int:
        return self.mu.size

    @property
    def sd(self) -> FloatArray:
        return np.sqrt(self.sigma2)

    @property
    def sigma(self) -> FloatArray:
        return self._chol @ self._chol.T

    @property
    def cholesky(self) -> FloatArray:
        return self._chol

    @property
    def log_det(self) -> float:
        return self._log_det

    def precision(self) -> FloatArray:
        return linalg.cho_solve((self._chol, True), np.eye(self.p))

    def whiten(self, x: npt.ArrayLike) -> FloatArray:
        """``L^{-1}(x - μ)`` row-wise, so squared row norms are Mahalanobis distances."""
        centred = np.atleast_2d(np.asarray(x, dtype=np.float64)) - self.mu
        if centred.shape[-1] != self.p:
            raise StructuralError(f"observations have {centred.shape[-1]} coordinates, expected {self.p}.")
        return linalg.solve_triangular(self._chol, centred.T, lower=True).T
