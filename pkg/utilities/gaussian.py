"""
This Source Code Form is subject to the terms of the Mozilla Public
License, v. 2.0. If a copy of the MPL was not distributed with this
file, You can obtain one at http://mozilla.org/MPL/2.0/.

Density power divergence machinery for the multivariate normal.

``c = (2π)^{βp/2} |Σ|^{β/2}`` appears in every prefactor below; it is only ever handled as ``log c``.
Sums over observations are plain numpy reductions in row order.
"""

from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING, NamedTuple

import numpy as np
from scipy import linalg

from .containers.params import GaussianParams
from .exceptions import DegeneracyError, DomainError, StructuralError
from .matrix_ops import (
    ReorderPermutation,
    duplication_matrix,
    duplication_transpose,
    elimination_matrix,
    half_length,
    lower_indices,
    reorder_permutation,
    validate_correlation,
    vec,
    vech,
    vecl,
)

if TYPE_CHECKING:
    import numpy.typing as npt
    from scipy import sparse

    from .matrix_ops import FloatArray

__all__ = (
    "EtaBlocks",
    "InformationMatrix",
    "KappaSet",
    "ScoreVector",
    "WeightedScatter",
    "check_sample",
    "dpd_weight",
    "eta_blocks",
    "eta_vector",
    "j_beta",
    "k_beta",
    "k_beta_corr",
    "k_beta_corr_inverse",
    "k_kernel",
    "k_kernel_inverse",
    "kappa_constants",
    "log_c",
    "log_density",
    "phi_vector",
    "score_mu",
    "score_vech_sigma",
    "standardize",
    "theta_vector",
    "u_beta_n",
    "u_beta_terms",
    "v_beta_n_corr",
    "v_from_scatter",
    "weighted_scatter",
    "xi_beta",
)

LOGGER = logging.getLogger(__name__)
LOG_2PI: float = math.log(2.0 * math.pi)


class KappaSet(NamedTuple):
    """Scalar constants of the β-divergence information kernel.

    ``kappa0`` is the population value of the weight normaliser, the limit of ``κ̃₀``.
    """

    p: int
    beta: float
    kappa0: float
    kappa1: float
    kappa2: float
    kappa3: float
    xi_offset: float


class WeightedScatter(NamedTuple):
    s_matrix: FloatArray
    r_matrix: FloatArray
    kappa0_tilde: float
    weights: FloatArray
    weight_mean: float


class ScoreVector(NamedTuple):
    mu: FloatArray
    vech: FloatArray

    @property
    def full(self) -> FloatArray:
        return np.concatenate([self.mu, self.vech])


class InformationMatrix(NamedTuple):
    """A block-diagonal information-type matrix over θ = (μ, vech Σ)."""

    mu: FloatArray
    vech: FloatArray

    @property
    def full(self) -> FloatArray:
        return linalg.block_diag(self.mu, self.vech)


def _check_beta(beta: float) -> None:
    if not (beta >= 0.0 and math.isfinite(beta)):
        raise DomainError(f"beta must be a finite non-negative number, got {beta!r}.")


def check_sample(sample: npt.ArrayLike, *, min_rows: int = 2) -> FloatArray:
    x = np.asarray(sample, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, np.newaxis]
    if x.ndim != 2:
        raise StructuralError(f"a sample must be an n x p matrix, got {x.ndim} dimensions.")
    if x.shape[0] < min_rows:
        raise DegeneracyError(f"at least {min_rows} observations are needed, got {x.shape[0]}.")
    if not np.all(np.isfinite(x)):
        raise StructuralError("sample contains non-finite values.")
    return x


def _congruence(g: sparse.csr_array | sparse.csc_array, middle: FloatArray) -> FloatArray:
    # g^T @ middle @ g with g sparse, keeping every product sparse-by-dense.
    return np.asarray((g.T @ np.asarray(g.T @ middle).T).T)


def kappa_constants(p: int, beta: float) -> KappaSet:
    _check_beta(beta)
    if p < 1:
        raise StructuralError(f"dimension must be positive, got {p}.")

    kappa1 = 2.0 * (2.0 * beta + 1.0) ** (-p / 2 - 2)
    kappa2 = beta**2 * (4.0 * (2.0 * beta + 1.0) ** (-p / 2 - 2) - (beta + 1.0) ** (-(p + 2)))
    return KappaSet(
        p=p,
        beta=beta,
        kappa0=(beta + 1.0) ** (-p / 2 - 1),
        kappa1=kappa1,
        kappa2=kappa2,
        kappa3=kappa2 / kappa1,
        xi_offset=beta * (beta + 1.0) ** (-(p / 2 + 1)),
    )


def log_c(params: GaussianParams, beta: float) -> float:
    """``log((2π)^{βp/2} |Σ|^{β/2})``."""
    return beta * (params.p / 2 * LOG_2PI + params.log_det / 2)


def _mahalanobis(x: npt.ArrayLike, params: GaussianParams) -> FloatArray:
    z = params.whiten(x)
    return np.einsum("ij,ij->i", z, z)


def _squeeze(values: FloatArray, x: npt.ArrayLike) -> FloatArray | float:
    return float(values[0]) if np.ndim(x) == 1 else values


def log_density(x: npt.ArrayLike, params: GaussianParams) -> FloatArray | float:
    values = -(params.p / 2) * LOG_2PI - params.log_det / 2 - _mahalanobis(x, params) / 2
    return _squeeze(values, x)


def dpd_weight(x: npt.ArrayLike, params: GaussianParams, beta: float) -> FloatArray | float:
    _check_beta(beta)
    return _squeeze(np.exp(-beta / 2 * _mahalanobis(x, params)), x)


def score_mu(x: npt.ArrayLike, params: GaussianParams) -> FloatArray:
    centred = np.atleast_2d(np.asarray(x, dtype=np.float64)) - params.mu
    scores = linalg.cho_solve((params.cholesky, True), centred.T).T
    return scores[0] if np.ndim(x) == 1 else scores


def score_vech_sigma(x: npt.ArrayLike, params: GaussianParams) -> FloatArray:
    """``-½ G^T vec(Σ^{-1}) + ½ G^T vec(Σ^{-1}(x-μ)(x-μ)^T Σ^{-1})``, row-wise for a matrix of points."""
    y = np.atleast_2d(score_mu(x, params))
    rows, cols = lower_indices(params.p)
    # G^T vec(yy^T) counts each off-diagonal product twice.
    multiplicity = np.where(rows == cols, 1.0, 2.0)
    outer = y[:, rows] * y[:, cols] * multiplicity
    scores = (outer - duplication_transpose(params.precision())) / 2
    return scores[0] if np.ndim(x) == 1 else scores


def _c_matrix(precision: FloatArray) -> FloatArray:
    gv = duplication_transpose(precision)
    return np.outer(gv, gv)


def _kron_block(precision: FloatArray) -> FloatArray:
    g = duplication_matrix(precision.shape[0])
    return _congruence(g, np.kron(precision, precision))


def j_beta(params: GaussianParams, beta: float) -> InformationMatrix:
    """``J_β(θ) = E[s s^T f^β]`` in closed form."""
    _check_beta(beta)
    p = params.p
    precision = params.precision()
    inv_c = math.exp(-log_c(params, beta))

    j_mu = (beta + 1.0) ** (-p / 2 - 1) * inv_c * precision
    j_vech = (
        (beta + 1.0) ** (-p / 2 - 2)
        * inv_c
        / 4
        * (beta**2 * _c_matrix(precision) + 2.0 * _kron_block(precision))
    )
    return InformationMatrix(mu=j_mu, vech=j_vech)


def xi_beta(params: GaussianParams, beta: float) -> ScoreVector:
    """``ξ_β(θ) = E[s f^β]``; the mean block is identically zero."""
    _check_beta(beta)
    p = params.p
    factor = -(beta / 2) * (beta + 1.0) ** (-(p / 2 + 1)) * math.exp(-log_c(params, beta))
    return ScoreVector(mu=np.zeros(p), vech=factor * duplication_transpose(params.precision()))


def k_beta(params: GaussianParams, beta: float) -> InformationMatrix:
    """``K_β(θ) = J_{2β}(θ) - ξ_β ξ_β^T`` through the κ-constant form."""
    kappas = kappa_constants(params.p, beta)
    precision = params.precision()
    log_c2 = 2.0 * log_c(params, beta)

    k_mu = (2.0 * beta + 1.0) ** (-params.p / 2 - 1) * math.exp(-log_c2) * precision
    k_vech = (
        math.exp(-log_c2)
        / 4
        * (kappas.kappa1 * _kron_block(precision) + kappas.kappa2 * _c_matrix(precision))
    )
    return InformationMatrix(mu=k_mu, vech=k_vech)


def _correlation_inverse(r0: FloatArray) -> FloatArray:
    return linalg.cho_solve((linalg.cholesky(r0, lower=True), True), np.eye(r0.shape[0]))


def k_kernel(r0: npt.ArrayLike, beta: float) -> FloatArray:
    """The p² x p² kernel ``κ₁ (R₀^{-1} ⊗ R₀^{-1}) + κ₂ vec(R₀^{-1}) vec(R₀^{-1})^T``."""
    r0_ = validate_correlation(r0, name="R0")
    kappas = kappa_constants(r0_.shape[0], beta)
    r0_inv = _correlation_inverse(r0_)
    v = vec(r0_inv)
    return kappas.kappa1 * np.kron(r0_inv, r0_inv) + kappas.kappa2 * np.outer(v, v)


def k_kernel_inverse(r0: npt.ArrayLike, beta: float) -> FloatArray:
    """Woodbury inverse of ``k_kernel``: ``κ₁^{-1}[(R₀ ⊗ R₀) - κ₃ vec(R₀) vec(R₀)^T / (1 + p κ₃)]``."""
    r0_ = validate_correlation(r0, name="R0")
    p = r0_.shape[0]
    kappas = kappa_constants(p, beta)
    v = vec(r0_)
    return (np.kron(r0_, r0_) - kappas.kappa3 / (1.0 + p * kappas.kappa3) * np.outer(v, v)) / kappas.kappa1


def _corr_log_c(sigma2: FloatArray, r0: FloatArray, beta: float) -> float:
    _, log_det_r0 = np.linalg.slogdet(r0)
    log_det = float(np.sum(np.log(sigma2))) + float(log_det_r0)
    return beta * (r0.shape[0] / 2 * LOG_2PI + log_det / 2)


def _positive_variances(sigma2: npt.ArrayLike, p: int) -> FloatArray:
    s2 = np.asarray(sigma2, dtype=np.float64)
    if s2.shape != (p,):
        raise StructuralError(f"expected {p} variances, got shape {s2.shape}.")
    if np.any(s2 <= 0) or not np.all(np.isfinite(s2)):
        raise DomainError("variances must be strictly positive.")
    return s2


def k_beta_corr(sigma2: npt.ArrayLike, r0: npt.ArrayLike, beta: float) -> FloatArray:
    """``K_β(vech Σ)`` at ``Σ = Λ^{1/2} R₀ Λ^{1/2}`` assembled from the correlation kernel."""
    r0_ = validate_correlation(r0, name="R0")
    p = r0_.shape[0]
    s2 = _positive_variances(sigma2, p)
    scale = 1.0 / vec(np.outer(np.sqrt(s2), np.sqrt(s2)))

    middle = scale[:, np.newaxis] * k_kernel(r0_, beta) * scale[np.newaxis, :]
    return math.exp(-2.0 * _corr_log_c(s2, r0_, beta)) / 4 * _congruence(duplication_matrix(p), middle)


def k_beta_corr_inverse(sigma2: npt.ArrayLike, r0: npt.ArrayLike, beta: float) -> FloatArray:
    """``K_β^{-1}(vech Σ) = 4 c² L_p (Λ^{1/2} ⊗ Λ^{1/2}) [kernel]^{-1} (Λ^{1/2} ⊗ Λ^{1/2}) L_p^T``."""
    r0_ = validate_correlation(r0, name="R0")
    p = r0_.shape[0]
    s2 = _positive_variances(sigma2, p)
    scale = vec(np.outer(np.sqrt(s2), np.sqrt(s2)))

    middle = scale[:, np.newaxis] * k_kernel_inverse(r0_, beta) * scale[np.newaxis, :]
    return 4.0 * math.exp(2.0 * _corr_log_c(s2, r0_, beta)) * _congruence(elimination_matrix(p).T, middle)


def standardize(sample: npt.ArrayLike, mu: npt.ArrayLike, sigma2: npt.ArrayLike) -> FloatArray:
    """``Λ^{-1/2}(X_i - μ)`` for every row."""
    x = check_sample(sample, min_rows=1)
    return (x - np.asarray(mu, dtype=np.float64)) / np.sqrt(_positive_variances(sigma2, x.shape[1]))


def weighted_scatter(
    sample: npt.ArrayLike,
    mu: npt.ArrayLike,
    sigma2: npt.ArrayLike,
    r0: npt.ArrayLike,
    beta: float,
    *,
    r0_inverse: FloatArray | None = None,
) -> WeightedScatter:
    """Weighted scatter ``S_X,β`` and its correlation form ``R_X,β`` at (μ, Λ) with weights under ``R₀``.

    ``r0_inverse`` lets callers with a closed-form inverse skip the factorization.
    """
    x = check_sample(sample)
    n, p = x.shape
    if r0_inverse is None:
        r0_inverse = _correlation_inverse(validate_correlation(r0, name="R0"))
    kappas = kappa_constants(p, beta)

    z = standardize(x, mu, sigma2)
    weights = np.exp(-beta / 2 * np.einsum("ij,jk,ik->i", z, r0_inverse, z))
    weight_mean = float(np.mean(weights))
    kappa0_tilde = weight_mean - kappas.xi_offset
    if kappa0_tilde <= 0:
        raise DegeneracyError(
            f"weight normaliser is {kappa0_tilde:.3g} <= 0: every observation is downweighted, beta={beta} is too large "
            "for this sample."
        )

    centred = x - np.asarray(mu, dtype=np.float64)
    s_matrix = (centred.T * weights) @ centred / (n * kappa0_tilde)
    sd = np.sqrt(np.asarray(sigma2, dtype=np.float64))
    return WeightedScatter(
        s_matrix=s_matrix,
        r_matrix=s_matrix / np.outer(sd, sd),
        kappa0_tilde=kappa0_tilde,
        weights=weights,
        weight_mean=weight_mean,
    )


def u_beta_terms(sample: npt.ArrayLike, params: GaussianParams, beta: float) -> FloatArray:
    """Per-observation β-scores ``s_θ(X_i) f_θ^β(X_i) - ξ_β(θ)`` as an n x (p + p(p+1)/2) matrix."""
    x = check_sample(sample, min_rows=1)
    weights = np.exp(-beta / 2 * _mahalanobis(x, params)) * math.exp(-log_c(params, beta))
    scores = np.hstack([np.atleast_2d(score_mu(x, params)), np.atleast_2d(score_vech_sigma(x, params))])
    return weights[:, np.newaxis] * scores - xi_beta(params, beta).full


def u_beta_n(sample: npt.ArrayLike, params: GaussianParams, beta: float) -> ScoreVector:
    _check_beta(beta)
    mean = np.mean(u_beta_terms(sample, params, beta), axis=0)
    return ScoreVector(mu=mean[: params.p], vech=mean[params.p :])


def v_from_scatter(
    r_tilde: npt.ArrayLike,
    kappa0_tilde: float,
    sigma2: npt.ArrayLike,
    r0: npt.ArrayLike,
    beta: float,
) -> FloatArray:
    """The p²-vector ``V`` with ``U_β,n(vech Σ̃) = G_p^T V`` at ``Σ̃ = Λ̃^{1/2} R₀ Λ̃^{1/2}``."""
    r0_ = validate_correlation(r0, name="R0")
    s2 = _positive_variances(sigma2, r0_.shape[0])
    r0_inv = _correlation_inverse(r0_)
    sd = np.sqrt(s2)

    core = r0_inv @ (np.asarray(r_tilde, dtype=np.float64) - r0_) @ r0_inv
    # positive sign, R̃ - R₀; every statistic is quadratic in V.
    factor = kappa0_tilde / 2 * math.exp(-_corr_log_c(s2, r0_, beta))
    return factor * vec(core / np.outer(sd, sd))


def v_beta_n_corr(
    sample: npt.ArrayLike,
    mu: npt.ArrayLike,
    sigma2: npt.ArrayLike,
    r0: npt.ArrayLike,
    beta: float,
) -> FloatArray:
    scatter = weighted_scatter(sample, mu, sigma2, r0, beta)
    return v_from_scatter(scatter.r_matrix, scatter.kappa0_tilde, sigma2, r0, beta)


class EtaBlocks(NamedTuple):
    """Change of coordinates from θ₂ = vech Σ to η₂ = (σ², vecl R).

    ``scaling`` is the diagonal of ``D = diag{σ_i σ_j}_{i<j}``.
    """

    p: int
    scaling: FloatArray
    permutation: ReorderPermutation

    @property
    def d(self) -> FloatArray:
        return np.diag(self.scaling)

    @property
    def _weights(self) -> FloatArray:
        return np.concatenate([np.ones(self.p), self.scaling])

    def vector(self, theta2: npt.ArrayLike) -> tuple[FloatArray, FloatArray]:
        """``(P^T v, D Q^T v)`` for a θ₂-indexed score or ξ vector."""
        v = self.permutation.apply_transpose(theta2)
        return v[: self.p], self.scaling * v[self.p :]

    def matrix(self, theta2: npt.ArrayLike) -> FloatArray:
        """The η₂ form of a θ₂-indexed J or K matrix, with blocks ``P^T X P``, ``P^T X Q D``, ``D Q^T X Q D``."""
        x = np.asarray(theta2, dtype=np.float64)
        size = half_length(self.p)
        if x.shape != (size, size):
            raise StructuralError(f"expected a {size} x {size} matrix, got {x.shape}.")
        order = self.permutation.order
        return self._weights[:, np.newaxis] * x[np.ix_(order, order)] * self._weights[np.newaxis, :]

    def correlation_block(self, theta2: npt.ArrayLike) -> FloatArray:
        return self.matrix(theta2)[self.p :, self.p :]


def eta_blocks(params: GaussianParams) -> EtaBlocks:
    rows, cols = lower_indices(params.p, strict=True)
    sd = params.sd
    return EtaBlocks(p=params.p, scaling=sd[rows] * sd[cols], permutation=reorder_permutation(params.p))


def theta_vector(params: GaussianParams) -> FloatArray:
    return np.concatenate([params.mu, vech(params.sigma)])


def phi_vector(params: GaussianParams) -> FloatArray:
    permutation = reorder_permutation(params.p)
    return np.concatenate([params.mu, permutation.apply_transpose(vech(params.sigma))])


def eta_vector(params: GaussianParams) -> FloatArray:
    tail = vecl(params.corr) if params.p > 1 else np.empty(0)
    return np.concatenate([params.mu, params.sigma2, tail])
