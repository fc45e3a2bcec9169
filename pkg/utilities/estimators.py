"""
This Source Code Form is subject to the terms of the Mozilla Public
License, v. 2.0. If a copy of the MPL was not distributed with this
file, You can obtain one at http://mozilla.org/MPL/2.0/.

Restricted minimum-DPD estimators of (μ, σ²) under correlation-matrix nulls.

Every fit alternates three steps until the largest relative change drops below the tolerance:
DPD weights at the current estimate, the weighted mean, then the variances from the weighted scatter.
At β=0 the weights are all one and the alternation stops after one pass at the maximum likelihood closed form.
"""

from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING, NamedTuple

import numpy as np
from scipy import linalg

from .constants import MIN_EFFECTIVE_OBSERVATIONS, VARIANCE_COLLAPSE_RATIO
from .containers.fits import FitConfig, RestrictedFit
from .exceptions import ConvergenceError, DegeneracyError, StructuralError, ValidityError
from .flags import HypothesisKind
from .gaussian import check_sample, weighted_scatter
from .matrix_ops import (
    equicorr_domain,
    equicorr_inverse,
    equicorrelation,
    lower_indices,
    validate_correlation,
)

if TYPE_CHECKING:
    import numpy.typing as npt

    from .matrix_ops import FloatArray

__all__ = (
    "fit_equicorr_fixed",
    "fit_equicorr_free",
    "fit_given_correlation",
    "fit_independence",
    "solve_variances",
)

LOGGER = logging.getLogger(__name__)

_NEWTON_MAX_STEPS: int = 100
_NEWTON_TOLERANCE: float = 1e-14


class _State(NamedTuple):
    mu: FloatArray
    sigma2: FloatArray
    rho: float | None


def _start(sample: npt.ArrayLike, *, name: str) -> FloatArray:
    x = check_sample(sample)
    n, p = x.shape
    variances = np.var(x, axis=0)
    if np.any(variances <= 0):
        columns = ", ".join(str(j + 1) for j in np.flatnonzero(variances <= 0))
        raise DegeneracyError(f"column(s) {columns} have zero variance.")
    if n <= p:
        LOGGER.warning("[Estimators] -> %s :: n=%r does not exceed p=%r, estimates may be unstable.", name, n, p)
    return x


def _scatter_about(x: FloatArray, mu: FloatArray, weights: FloatArray, kappa0_tilde: float) -> FloatArray:
    centred = x - mu
    return (centred.T * weights) @ centred / (x.shape[0] * kappa0_tilde)


def _coordinate_sweep(b: FloatArray, tau: FloatArray) -> FloatArray:
    tau = tau.copy()
    for j in range(tau.size):
        a = b[j, j]
        rest = float(b[j] @ tau - a * tau[j])
        root = math.sqrt(rest * rest + 4.0 * a)
        # positive root of a t^2 + rest t - 1 = 0, cancellation-free on both branches.
        tau[j] = 2.0 / (rest + root) if rest >= 0 else (root - rest) / (2.0 * a)
    return tau


def _objective(b: FloatArray, tau: FloatArray) -> float:
    return 0.5 * float(tau @ b @ tau) - float(np.sum(np.log(tau)))


def solve_variances(s_matrix: npt.ArrayLike, precision: npt.ArrayLike) -> FloatArray:
    """Variances ``σ²`` with ``diag{R₀^{-1} Λ^{-1/2} S Λ^{-1/2}} = 1``.

    With ``τ = 1/σ`` and ``B = R₀^{-1} ∘ S`` the equations are ``τ_j (Bτ)_j = 1``, the stationarity
    conditions of ``½ τ^T B τ - Σ log τ_j``. One coordinate sweep warms up the iterate and damped Newton
    steps finish it.
    """
    s = np.asarray(s_matrix, dtype=np.float64)
    b = np.asarray(precision, dtype=np.float64) * s
    diagonal = np.diag(b)
    if np.any(diagonal <= 0):
        raise DegeneracyError("weighted scatter has a non-positive diagonal entry.")

    tau = _coordinate_sweep(b, 1.0 / np.sqrt(diagonal))
    for _ in range(_NEWTON_MAX_STEPS):
        bt = b @ tau
        if np.max(np.abs(tau * bt - 1.0)) < _NEWTON_TOLERANCE:
            break
        gradient = bt - 1.0 / tau
        try:
            step = linalg.solve(b + np.diag(1.0 / tau**2), gradient, assume_a="pos")
        except linalg.LinAlgError as exc:
            raise DegeneracyError("variance subproblem is singular.") from exc

        current = _objective(b, tau)
        scale = 1.0
        candidate = tau - step
        while np.any(candidate <= 0) or _objective(b, candidate) > current:
            scale /= 2
            if scale < 1e-12:
                break
            candidate = tau - scale * step
        else:
            tau = candidate
            continue
        # no descent left at machine precision.
        break

    return 1.0 / tau**2


def _change(old: _State, new: _State) -> float:
    sd = np.sqrt(old.sigma2)
    change = max(
        float(np.max(np.abs(new.mu - old.mu) / sd)),
        float(np.max(np.abs(new.sigma2 - old.sigma2) / old.sigma2)),
    )
    if old.rho is not None and new.rho is not None:
        change = max(change, abs(new.rho - old.rho))
    return change


def _damp(old: _State, new: _State, damping: float) -> _State:
    if damping == 1.0:
        return new
    rho = None if new.rho is None or old.rho is None else old.rho + damping * (new.rho - old.rho)
    return _State(
        mu=old.mu + damping * (new.mu - old.mu),
        sigma2=old.sigma2 + damping * (new.sigma2 - old.sigma2),
        rho=rho,
    )


def _pooled_correlation(s_matrix: FloatArray, p: int) -> float:
    """Average off-diagonal correlation of a scatter matrix, checked against the equicorrelation interval."""
    sd = np.sqrt(np.diag(s_matrix))
    rows, cols = lower_indices(p, strict=True)
    rho = float(np.mean((s_matrix / np.outer(sd, sd))[rows, cols]))
    lower, upper = equicorr_domain(p)
    if not (lower < rho < upper):
        raise ValidityError(f"estimated equicorrelation {rho!r} is outside ({lower:.6g}, {upper:g}) for p={p}.")
    return rho


def _check_collapse(
    kind: HypothesisKind,
    beta: float,
    weights: FloatArray,
    sigma2: FloatArray | None,
    start: FloatArray,
) -> None:
    """Raise once the weights or the variances have collapsed, before they reach the next weighting step."""
    total = float(weights.sum())
    effective = total**2 / float(weights @ weights) if total > 0 else 0.0
    if not effective >= MIN_EFFECTIVE_OBSERVATIONS:
        raise DegeneracyError(
            f"{kind.value} fit at beta={beta}: the weights rest on {effective:.3g} effective observations; "
            "beta is too large for this sample."
        )
    if sigma2 is not None and not np.all(sigma2 > VARIANCE_COLLAPSE_RATIO * start):
        raise DegeneracyError(f"{kind.value} fit at beta={beta}: the variances collapsed towards zero.")


def _fit_with_precision(
    x: FloatArray,
    kind: HypothesisKind,
    r0: FloatArray,
    precision: FloatArray,
    beta: float,
    cfg: FitConfig,
    *,
    diagonal_only: bool,
) -> RestrictedFit:
    def variances(s: FloatArray) -> FloatArray:
        return np.diag(s).copy() if diagonal_only else solve_variances(s, precision)

    # β=0 closed forms.
    mu = np.mean(x, axis=0)
    state = _State(mu=mu, sigma2=variances(_scatter_about(x, mu, np.ones(x.shape[0]), 1.0)), rho=None)
    start = state.sigma2

    trace: list[float] = []
    converged = False
    for _ in range(cfg.max_iterations):
        scatter = weighted_scatter(x, state.mu, state.sigma2, r0, beta, r0_inverse=precision)
        weights = scatter.weights
        _check_collapse(kind, beta, weights, None, start)
        mu = weights @ x / weights.sum()
        proposal = _State(
            mu=mu,
            sigma2=variances(_scatter_about(x, mu, weights, scatter.kappa0_tilde)),
            rho=None,
        )
        _check_collapse(kind, beta, weights, proposal.sigma2, start)
        trace.append(_change(state, proposal))
        state = _damp(state, proposal, cfg.damping)
        if trace[-1] < cfg.tolerance:
            converged = True
            break

    final = weighted_scatter(x, state.mu, state.sigma2, r0, beta, r0_inverse=precision)
    sigma2 = variances(final.s_matrix)
    sd = np.sqrt(sigma2)
    r_tilde = final.s_matrix / np.outer(sd, sd)
    if diagonal_only:
        np.fill_diagonal(r_tilde, 1.0)

    fit = RestrictedFit(
        kind=kind,
        beta=beta,
        mu_tilde=state.mu,
        sigma2_tilde=sigma2,
        r_tilde=r_tilde,
        r0=r0,
        rho_tilde=None,
        kappa0_tilde=final.kappa0_tilde,
        weights=final.weights,
        iterations=len(trace),
        converged=converged,
        residual=trace[-1],
        trace=tuple(trace),
    )
    return _finish(fit, cfg)


def _finish(fit: RestrictedFit, cfg: FitConfig) -> RestrictedFit:
    if not fit.converged:
        LOGGER.warning(
            "[Estimators] -> %s :: no convergence after %r iterations at beta=%r, last change %r.",
            fit.kind.value,
            fit.iterations,
            fit.beta,
            fit.residual,
        )
        raise ConvergenceError(
            fit,
            f"{fit.kind.value} fit did not converge in {cfg.max_iterations} iterations at beta={fit.beta} "
            f"(last relative change {fit.residual:.3g}).",
        )
    LOGGER.debug(
        "[Estimators] -> %s :: converged in %r iterations at beta=%r, residual %r.",
        fit.kind.value,
        fit.iterations,
        fit.beta,
        fit.residual,
    )
    return fit


def fit_given_correlation(
    sample: npt.ArrayLike,
    r0: npt.ArrayLike,
    beta: float,
    cfg: FitConfig | None = None,
) -> RestrictedFit:
    """Restricted fit of (μ, σ²) when the correlation matrix is fully specified by ``r0``."""
    cfg = (cfg or FitConfig()).validate()
    x = _start(sample, name="fit_given_correlation")
    r0_ = validate_correlation(r0, name="R0")
    if r0_.shape[0] != x.shape[1]:
        raise StructuralError(f"R0 has order {r0_.shape[0]} but the sample has {x.shape[1]} columns.")

    precision = linalg.cho_solve((linalg.cholesky(r0_, lower=True), True), np.eye(r0_.shape[0]))
    return _fit_with_precision(x, HypothesisKind.specified, r0_, precision, beta, cfg, diagonal_only=False)


def fit_equicorr_fixed(
    sample: npt.ArrayLike,
    rho0: float,
    beta: float,
    cfg: FitConfig | None = None,
) -> RestrictedFit:
    cfg = (cfg or FitConfig()).validate()
    x = _start(sample, name="fit_equicorr_fixed")
    p = x.shape[1]
    r0 = equicorrelation(rho0, p)
    return _fit_with_precision(
        x, HypothesisKind.equicorr_fixed, r0, equicorr_inverse(rho0, p), beta, cfg, diagonal_only=False
    )


def fit_independence(sample: npt.ArrayLike, beta: float, cfg: FitConfig | None = None) -> RestrictedFit:
    cfg = (cfg or FitConfig()).validate()
    x = _start(sample, name="fit_independence")
    p = x.shape[1]
    return _fit_with_precision(x, HypothesisKind.independence, np.eye(p), np.eye(p), beta, cfg, diagonal_only=True)


def fit_equicorr_free(sample: npt.ArrayLike, beta: float, cfg: FitConfig | None = None) -> RestrictedFit:
    """Restricted fit under a common but unknown correlation ρ.

    ρ̃ is the average off-diagonal entry of the weighted correlation matrix, re-estimated every pass
    alongside (μ, σ²).
    """
    cfg = (cfg or FitConfig()).validate()
    x = _start(sample, name="fit_equicorr_free")
    n, p = x.shape
    if p < 2:
        raise StructuralError(f"equicorrelation needs at least two variables, got p={p}.")

    rho = _pooled_correlation(_scatter_about(x, np.mean(x, axis=0), np.ones(n), 1.0), p)
    state = _State(mu=np.mean(x, axis=0), sigma2=np.var(x, axis=0), rho=rho)
    start = state.sigma2

    trace: list[float] = []
    converged = False
    for _ in range(cfg.max_iterations):
        scatter = weighted_scatter(
            x, state.mu, state.sigma2, equicorrelation(rho, p), beta, r0_inverse=equicorr_inverse(rho, p)
        )
        weights = scatter.weights
        _check_collapse(HypothesisKind.equicorr_free, beta, weights, None, start)
        mu = weights @ x / weights.sum()
        s = _scatter_about(x, mu, weights, scatter.kappa0_tilde)
        _check_collapse(HypothesisKind.equicorr_free, beta, weights, np.diag(s), start)
        proposal = _State(mu=mu, sigma2=np.diag(s).copy(), rho=_pooled_correlation(s, p))

        trace.append(_change(state, proposal))
        state = _damp(state, proposal, cfg.damping)
        rho = rho if state.rho is None else state.rho
        if trace[-1] < cfg.tolerance:
            converged = True
            break

    final = weighted_scatter(x, state.mu, state.sigma2, equicorrelation(rho, p), beta, r0_inverse=equicorr_inverse(rho, p))
    sigma2 = np.diag(final.s_matrix).copy()
    sd = np.sqrt(sigma2)
    r_tilde = final.s_matrix / np.outer(sd, sd)
    np.fill_diagonal(r_tilde, 1.0)
    rho = _pooled_correlation(final.s_matrix, p)

    fit = RestrictedFit(
        kind=HypothesisKind.equicorr_free,
        beta=beta,
        mu_tilde=state.mu,
        sigma2_tilde=sigma2,
        r_tilde=r_tilde,
        r0=equicorrelation(rho, p),
        rho_tilde=rho,
        kappa0_tilde=final.kappa0_tilde,
        weights=final.weights,
        iterations=len(trace),
        converged=converged,
        residual=trace[-1],
        trace=tuple(trace),
    )
    return _finish(fit, cfg)
