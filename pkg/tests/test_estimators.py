from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import gaussian_sample, pearson, random_correlation
from utilities import estimators
from utilities.constants import EXIT_NUMERICAL_ERROR
from utilities.containers.fits import FitConfig
from utilities.exceptions import ConvergenceError, DegeneracyError, DomainError, RaoError, StructuralError
from utilities.flags import HypothesisKind
from utilities.gaussian import weighted_scatter
from utilities.matrix_ops import equicorrelation, lower_indices


def _fits(x: np.ndarray, beta: float, r0: np.ndarray):
    p = x.shape[1]
    return {
        "given": estimators.fit_given_correlation(x, r0, beta),
        "fixed": estimators.fit_equicorr_fixed(x, 0.2, beta),
        "independence": estimators.fit_independence(x, beta),
        "free": estimators.fit_equicorr_free(x, beta) if p > 1 else None,
    }


def test_independence_closed_form_at_zero(rng):
    x = gaussian_sample(rng, 60, random_correlation(rng, 4), sigma2=np.array([1.0, 4.0, 0.25, 2.0]))
    fit = estimators.fit_independence(x, 0.0)

    assert fit.kind is HypothesisKind.independence
    assert fit.iterations == 1
    assert fit.converged
    assert fit.kappa0_tilde == 1.0
    assert_allclose(fit.mu_tilde, x.mean(axis=0), rtol=1e-13)
    assert_allclose(fit.sigma2_tilde, x.var(axis=0), rtol=1e-13)
    assert_allclose(fit.r_tilde, pearson(x), rtol=1e-12, atol=1e-14)


def test_given_identity_matches_sample_moments(rng):
    x = gaussian_sample(rng, 40, np.eye(3), mu=np.array([1.0, -1.0, 5.0]))
    fit = estimators.fit_given_correlation(x, np.eye(3), 0.0)
    assert_allclose(fit.mu_tilde, x.mean(axis=0), rtol=1e-13)
    assert_allclose(fit.sigma2_tilde, x.var(axis=0), rtol=1e-12)


@pytest.mark.parametrize("rho0", [-0.6, 0.0, 0.3, 0.8])
def test_given_bivariate_closed_form(rng, rho0):
    x = gaussian_sample(rng, 80, equicorrelation(0.5, 2), sigma2=np.array([2.0, 0.5]))
    fit = estimators.fit_given_correlation(x, equicorrelation(rho0, 2), 0.0)

    s2 = x.var(axis=0)
    r12 = pearson(x)[0, 1]
    assert_allclose(fit.sigma2_tilde, s2 * (1 - rho0 * r12) / (1 - rho0**2), rtol=1e-10)
    assert np.sqrt(fit.sigma2_tilde[0] / fit.sigma2_tilde[1]) == pytest.approx(np.sqrt(s2[0] / s2[1]), rel=1e-10)


@pytest.mark.parametrize("beta", [0.0, 0.3, 0.8])
def test_given_estimating_equations(rng, beta):
    r0 = random_correlation(rng, 4)
    x = gaussian_sample(rng, 150, r0, mu=np.array([0.5, 0.0, -2.0, 1.0]), sigma2=np.array([1.0, 3.0, 0.5, 2.0]))
    fit = estimators.fit_given_correlation(x, r0, beta)

    relative = np.linalg.solve(r0, fit.r_tilde)
    assert_allclose(np.diag(relative), np.ones(4), atol=1e-10)
    assert np.trace(relative) == pytest.approx(4.0, abs=1e-8)

    # re-evaluated from scratch, the mean update is a fixed point.
    scatter = weighted_scatter(x, fit.mu_tilde, fit.sigma2_tilde, r0, beta)
    mu = scatter.weights @ x / scatter.weights.sum()
    assert_allclose(mu, fit.mu_tilde, atol=1e-8 * np.sqrt(fit.sigma2_tilde).max())
    sd = np.sqrt(fit.sigma2_tilde)
    assert_allclose(scatter.s_matrix, fit.r_tilde * np.outer(sd, sd), rtol=1e-8, atol=1e-9)


def test_solve_variances(rng):
    r0 = random_correlation(rng, 5)
    a = rng.normal(size=(5, 5))
    s = a @ a.T + np.eye(5)
    sigma2 = estimators.solve_variances(s, np.linalg.inv(r0))

    sd = np.sqrt(sigma2)
    assert np.all(sigma2 > 0)
    assert_allclose(np.diag(np.linalg.solve(r0, s / np.outer(sd, sd))), np.ones(5), atol=1e-12)


def test_solve_variances_identity_is_diagonal(rng):
    a = rng.normal(size=(4, 4))
    s = a @ a.T + np.eye(4)
    assert_allclose(estimators.solve_variances(s, np.eye(4)), np.diag(s), rtol=1e-13)


def test_fixed_at_zero_is_independence(rng):
    x = gaussian_sample(rng, 120, random_correlation(rng, 3))
    for beta in (0.0, 0.4):
        fixed = estimators.fit_equicorr_fixed(x, 0.0, beta)
        independence = estimators.fit_independence(x, beta)
        assert_allclose(fixed.sigma2_tilde, independence.sigma2_tilde, rtol=1e-8)
        assert_allclose(fixed.mu_tilde, independence.mu_tilde, atol=1e-8)
        assert_allclose(fixed.r_tilde, independence.r_tilde, atol=1e-8)


@pytest.mark.parametrize("beta", [0.0, 0.3])
def test_fixed_agrees_with_given(rng, beta):
    x = gaussian_sample(rng, 150, equicorrelation(0.3, 4))
    fixed = estimators.fit_equicorr_fixed(x, 0.35, beta)
    given = estimators.fit_given_correlation(x, equicorrelation(0.35, 4), beta)
    assert_allclose(fixed.sigma2_tilde, given.sigma2_tilde, rtol=1e-8)
    assert_allclose(fixed.r_tilde, given.r_tilde, rtol=1e-8, atol=1e-10)


def test_fixed_on_exactly_equicorrelated_sample(rng):
    # whiten, then colour with R(ρ₀): the Pearson matrix is exactly R(ρ₀).
    z = rng.normal(size=(50, 3))
    z -= z.mean(axis=0)
    z = z @ np.linalg.inv(np.linalg.cholesky(z.T @ z / 50)).T
    x = z @ np.linalg.cholesky(equicorrelation(0.4, 3)).T * [1.0, 2.0, 3.0]

    fit = estimators.fit_equicorr_fixed(x, 0.4, 0.0)
    assert_allclose(np.diag(fit.r_tilde), np.ones(3), atol=1e-10)
    assert_allclose(fit.r_tilde, equicorrelation(0.4, 3), atol=1e-10)


def test_fixed_domain_error(rng):
    x = rng.normal(size=(20, 3))
    with pytest.raises(DomainError, match="admissible interval"):
        estimators.fit_equicorr_fixed(x, -0.5, 0.0)


def test_constant_column_is_degenerate(rng):
    x = rng.normal(size=(30, 3))
    x[:, 1] = 4.0
    with pytest.raises(DegeneracyError, match="column"):
        estimators.fit_independence(x, 0.0)


def test_too_few_observations():
    with pytest.raises(DegeneracyError):
        estimators.fit_independence(np.ones((1, 3)), 0.0)


def test_outlier_is_downweighted(rng):
    x = rng.normal(size=(100, 3))
    x[-1] = 10.0
    fit = estimators.fit_independence(x, 0.5)
    assert fit.weights[-1] < fit.weights[:-1].min()
    assert fit.min_weight == fit.weights[-1]
    assert fit.effective_n < 100


def test_free_at_zero_is_average_pearson(rng):
    x = gaussian_sample(rng, 90, equicorrelation(0.3, 4))
    fit = estimators.fit_equicorr_free(x, 0.0)
    rows, cols = lower_indices(4, strict=True)
    assert fit.iterations == 1
    assert fit.rho_tilde == pytest.approx(pearson(x)[rows, cols].mean(), rel=1e-12)
    assert_allclose(fit.r0, equicorrelation(fit.rho_tilde, 4))


def test_free_bivariate_is_pearson(rng):
    x = gaussian_sample(rng, 40, equicorrelation(-0.2, 2))
    assert estimators.fit_equicorr_free(x, 0.0).rho_tilde == pytest.approx(pearson(x)[0, 1], rel=1e-12)


@pytest.mark.parametrize("beta", [0.0, 0.3, 0.7])
def test_free_estimating_equations(rng, beta):
    x = gaussian_sample(rng, 200, equicorrelation(0.25, 5), sigma2=np.array([1.0, 2.0, 3.0, 0.5, 1.5]))
    fit = estimators.fit_equicorr_free(x, beta)
    rows, cols = lower_indices(5, strict=True)

    assert_allclose(np.diag(fit.r_tilde), np.ones(5))
    assert fit.r_tilde[rows, cols].sum() == pytest.approx(10 * fit.rho_tilde, rel=1e-12)
    assert -0.25 < fit.rho_tilde < 1


def test_free_needs_two_variables(rng):
    with pytest.raises(StructuralError):
        estimators.fit_equicorr_free(rng.normal(size=(20, 1)), 0.0)


def test_given_order_mismatch(rng):
    with pytest.raises(StructuralError, match="3 columns"):
        estimators.fit_given_correlation(rng.normal(size=(20, 3)), np.eye(4), 0.0)


@pytest.mark.parametrize("p", [2, 4, 6])
def test_small_beta_continuity(rng, p):
    x = gaussian_sample(rng, 200, random_correlation(rng, p))
    r0 = random_correlation(rng, p)
    exact = _fits(x, 0.0, r0)
    nearby = _fits(x, 1e-8, r0)
    for name, fit in exact.items():
        assert_allclose(nearby[name].mu_tilde, fit.mu_tilde, rtol=1e-4, atol=1e-6)
        assert_allclose(nearby[name].sigma2_tilde, fit.sigma2_tilde, rtol=1e-4)
        assert_allclose(nearby[name].r_tilde, fit.r_tilde, rtol=1e-4, atol=1e-6)


@pytest.mark.parametrize("beta", [0.0, 0.4])
def test_column_scaling_equivariance(rng, beta):
    r0 = random_correlation(rng, 3)
    x = gaussian_sample(rng, 150, r0)
    scale = np.array([1.0, 7.5, 0.2])
    shift = np.array([3.0, -1.0, 10.0])
    original = _fits(x, beta, r0)
    transformed = _fits(x * scale + shift, beta, r0)

    for name, fit in original.items():
        moved = transformed[name]
        assert_allclose(moved.sigma2_tilde, fit.sigma2_tilde * scale**2, rtol=1e-8)
        assert_allclose(moved.mu_tilde, fit.mu_tilde * scale + shift, rtol=1e-8)
        assert_allclose(moved.r_tilde, fit.r_tilde, rtol=1e-8, atol=1e-10)
        if fit.rho_tilde is not None:
            assert moved.rho_tilde == pytest.approx(fit.rho_tilde, rel=1e-8)


@pytest.mark.slow
@pytest.mark.parametrize("beta", [0.0, 0.3])
def test_consistency(rng, beta):
    mu = np.array([1.0, -2.0, 0.5])
    sigma2 = np.array([1.0, 4.0, 0.25])
    x = gaussian_sample(rng, 10_000, equicorrelation(0.3, 3), mu=mu, sigma2=sigma2)
    fit = estimators.fit_equicorr_free(x, beta)

    # generous Monte-Carlo bands: 4 standard errors of the sample analogues.
    assert np.all(np.abs(fit.mu_tilde - mu) < 4 * np.sqrt(sigma2 / 10_000) * 1.2)
    assert np.all(np.abs(fit.sigma2_tilde - sigma2) < 4 * sigma2 * np.sqrt(2 / 10_000) * 1.2)
    assert fit.rho_tilde == pytest.approx(0.3, abs=4 * (1 - 0.09) / np.sqrt(10_000) * 1.2)


def test_non_convergence_carries_trace(rng):
    x = gaussian_sample(rng, 100, random_correlation(rng, 3))
    with pytest.raises(ConvergenceError) as excinfo:
        estimators.fit_independence(x, 0.5, FitConfig(max_iterations=2))

    assert len(excinfo.value.trace) == 2
    assert not excinfo.value.fit.converged
    assert excinfo.value.fit.iterations == 2


@pytest.mark.parametrize("n, p", [(20, 30), (100, 20)])
def test_weight_collapse_is_a_numerical_failure(rng, n, p):
    x = rng.standard_normal((n, p))
    # the classical fit of the same sample is well defined.
    assert estimators.fit_independence(x, 0.0).converged

    with pytest.raises(DegeneracyError) as excinfo:
        estimators.fit_independence(x, 0.5)
    assert excinfo.value.exit_code == EXIT_NUMERICAL_ERROR

    with pytest.raises(RaoError) as excinfo:
        estimators.fit_equicorr_free(x, 0.5)
    assert excinfo.value.exit_code == EXIT_NUMERICAL_ERROR


def test_damping_reaches_the_same_fixed_point(rng):
    r0 = random_correlation(rng, 3)
    x = gaussian_sample(rng, 150, r0)
    plain = estimators.fit_given_correlation(x, r0, 0.5)
    damped = estimators.fit_given_correlation(x, r0, 0.5, FitConfig(damping=0.5))
    assert damped.iterations > plain.iterations
    assert_allclose(damped.sigma2_tilde, plain.sigma2_tilde, rtol=1e-8)


@pytest.mark.parametrize(
    "cfg",
    [FitConfig(tolerance=0.0), FitConfig(max_iterations=0), FitConfig(damping=0.0), FitConfig(damping=1.5)],
)
def test_fit_config_validation(rng, cfg):
    with pytest.raises(DomainError):
        estimators.fit_independence(rng.normal(size=(10, 2)), 0.0, cfg)


def test_fit_config_from_section():
    cfg = FitConfig.from_section({"tolerance": 1e-8, "max_iterations": 50}, max_iterations=20, damping=None)
    assert cfg == FitConfig(tolerance=1e-8, max_iterations=20, damping=1.0)


def test_summary_is_serialisable(rng):
    fit = estimators.fit_equicorr_free(rng.normal(size=(30, 3)), 0.2)
    summary = fit.summary()
    assert summary["rho"] == fit.rho_tilde
    assert isinstance(summary["r_tilde"], list)
    assert summary["converged"] is True
