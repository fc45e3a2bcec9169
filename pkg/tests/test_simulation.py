from __future__ import annotations

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import stats

from conftest import random_correlation
from utilities import simulation
from utilities.constants import WORKERS_ENV_VAR
from utilities.containers.params import GaussianParams
from utilities.containers.scenario import GeneratorSpec, ScenarioSpec
from utilities.exceptions import DataError, DomainError, EmptySummaryError
from utilities.flags import Contaminant, Generator, HypothesisKind


def _scenario(**overrides):
    document = {
        "scenario": {"name": "unit", "n": 60, "p": 3, "replications": 8, "seed": 5, "beta": [0.0, 0.5]},
        "generator": {"kind": "gaussian"},
        "tests": [{"kind": "independence"}, {"kind": "bartlett"}],
    }
    for key, value in overrides.items():
        if key in {"generator", "tests"}:
            document[key] = value
        else:
            document["scenario"][key] = value
    return ScenarioSpec.from_mapping(document)


def test_replication_streams_are_reproducible():
    first = simulation.replication_rng(3, 7).standard_normal(5)
    assert_array_equal(first, simulation.replication_rng(3, 7).standard_normal(5))
    assert not np.array_equal(first, simulation.replication_rng(3, 8).standard_normal(5))
    assert not np.array_equal(first, simulation.replication_rng(4, 7).standard_normal(5))


def test_correlation_with_pair():
    corr = simulation.correlation_with_pair(4, 0, 2, 0.5)
    expected = np.eye(4)
    expected[0, 2] = expected[2, 0] = 0.5
    assert_array_equal(corr, expected)


@pytest.mark.parametrize("i, j, rho", [(0, 0, 0.5), (0, 4, 0.5), (-1, 1, 0.5), (0, 1, 1.0)])
def test_correlation_with_pair_errors(i, j, rho):
    with pytest.raises(DomainError):
        simulation.correlation_with_pair(4, i, j, rho)


def test_sample_mvn_moments(rng):
    corr = random_correlation(rng, 3)
    params = GaussianParams([1.0, -2.0, 0.5], [1.0, 4.0, 0.25], corr)
    n = 100_000
    x = simulation.sample_mvn(n, params, 11)

    assert x.shape == (n, 3)
    sigma = params.sigma
    # var of a sample covariance entry is (σ_ij² + σ_ii σ_jj) / n.
    se = np.sqrt((sigma**2 + np.outer(np.diag(sigma), np.diag(sigma))) / n)
    assert np.all(np.abs(np.cov(x, rowvar=False) - sigma) < 5 * se)
    assert np.all(np.abs(x.mean(axis=0) - params.mu) < 5 * np.sqrt(np.diag(sigma) / n))


def test_zero_contamination_matches_clean_draws(rng):
    params = GaussianParams(np.zeros(3), np.ones(3), random_correlation(rng, 3))
    spec = GeneratorSpec(kind=Generator.contaminated, clean=params, epsilon=0.0, contaminant=Contaminant.point)
    assert_array_equal(simulation.sample_contaminated(50, spec, 9), simulation.sample_mvn(50, params, 9))


def test_shift_contamination_moves_the_mean():
    params = GaussianParams.standard(2)
    spec = GeneratorSpec(
        kind=Generator.contaminated,
        clean=params,
        epsilon=0.5,
        contaminant=Contaminant.shift,
        shift=np.array([10.0, -10.0]),
    )
    x = simulation.sample_contaminated(20_000, spec, 1)
    assert_allclose(x.mean(axis=0), [5.0, -5.0], atol=0.15)


def test_point_contamination_places_rows_exactly():
    params = GaussianParams.standard(2)
    point = np.array([5.0, 5.0])
    spec = GeneratorSpec(
        kind=Generator.contaminated,
        clean=params,
        epsilon=0.2,
        contaminant=Contaminant.point,
        point=point,
    )
    x = simulation.sample_contaminated(10_000, spec, 2)
    at_point = np.all(x == point, axis=1).mean()
    assert at_point == pytest.approx(0.2, abs=0.02)


def test_scale_contamination_inflates_variance():
    params = GaussianParams.standard(2)
    spec = GeneratorSpec(
        kind=Generator.contaminated,
        clean=params,
        epsilon=0.5,
        contaminant=Contaminant.scale,
        factor=9.0,
    )
    x = simulation.sample_contaminated(40_000, spec, 3)
    # half the rows have variance 1, half have variance 9.
    assert_allclose(x.var(axis=0), [5.0, 5.0], rtol=0.05)


def test_contamination_weight_domain():
    spec = GeneratorSpec(kind=Generator.contaminated, clean=GaussianParams.standard(2), epsilon=1.0)
    with pytest.raises(DomainError):
        simulation.sample_contaminated(10, spec, 0)


def test_heavy_tailed_variance():
    x = simulation.sample_heavy_tailed(100_000, GaussianParams.standard(2), 5.0, 4)
    # a multivariate t with ν degrees of freedom has variance ν / (ν - 2).
    assert_allclose(x.var(axis=0), [5 / 3, 5 / 3], rtol=0.06)
    with pytest.raises(DomainError):
        simulation.sample_heavy_tailed(10, GaussianParams.standard(2), 0.0, 4)


def test_ks_calibration_empty():
    with pytest.raises(EmptySummaryError):
        simulation.ks_calibration([], 3)


def test_ks_calibration_of_quantiles():
    size = 2000
    quantiles = stats.chi2.ppf((np.arange(size) + 0.5) / size, 3)
    assert simulation.ks_calibration(quantiles, 3) < 1.63 / math.sqrt(size)


def test_ks_calibration_of_constant():
    assert simulation.ks_calibration(np.full(50, 1e6), 3) == pytest.approx(1.0)


def test_ks_calibration_two_degrees_of_freedom(rng):
    values = rng.chisquare(2, size=500)
    expected = stats.kstest(values, "chi2", args=(2,)).statistic
    assert simulation.ks_calibration(values, 2) == pytest.approx(expected, abs=1e-12)


def test_ks_calibration_domain():
    with pytest.raises(DomainError):
        simulation.ks_calibration([1.0], 0)


def test_resolve_workers_precedence(monkeypatch):
    monkeypatch.setenv(WORKERS_ENV_VAR, "3")
    assert simulation.resolve_workers(5, 7) == 5
    assert simulation.resolve_workers(None, 7) == 3

    monkeypatch.delenv(WORKERS_ENV_VAR)
    assert simulation.resolve_workers(None, 7) == 7
    assert simulation.resolve_workers() >= 1


@pytest.mark.parametrize("value", ["many", "0"])
def test_resolve_workers_rejects_bad_environment(monkeypatch, value):
    monkeypatch.setenv(WORKERS_ENV_VAR, value)
    with pytest.raises(DomainError):
        simulation.resolve_workers()


def test_zero_replications():
    spec = _scenario()._replace(replications=0)
    with pytest.raises(EmptySummaryError):
        simulation.run_size_power(spec, workers=1)
    with pytest.raises(EmptySummaryError):
        _scenario(replications=0)


def test_summary_layout():
    summary = simulation.run_size_power(_scenario(), workers=1)

    # independence at two β values, the likelihood-ratio test once.
    assert [(cell.kind, cell.beta) for cell in summary.cells] == [
        (HypothesisKind.independence, 0.0),
        (HypothesisKind.independence, 0.5),
        (HypothesisKind.bartlett, None),
    ]
    for cell in summary.cells:
        assert cell.df == 3
        assert cell.completed + cell.failure_count == cell.replications == 8
        assert 0.0 <= cell.rejection_rate <= 1.0
        assert cell.ks_distance is not None

    assert summary.cell(HypothesisKind.bartlett, None).beta is None
    with pytest.raises(KeyError):
        summary.cell(HypothesisKind.equicorr_free, 0.0)


def test_failures_are_tallied_not_raised():
    spec = _scenario(tests=[{"kind": "bivariate", "rho0": 0.0}, {"kind": "independence"}], beta=[0.0])
    summary = simulation.run_size_power(spec, workers=1)

    failed = summary.cell(HypothesisKind.bivariate, 0.0)
    assert failed.completed == 0
    assert failed.failures == {"DomainError": 8}
    assert failed.rejection_rate == 0.0
    assert failed.ks_distance is None
    assert summary.cell(HypothesisKind.independence, 0.0).completed == 8


def test_summary_is_independent_of_worker_count():
    spec = _scenario(replications=6)
    serial = simulation.run_size_power(spec, workers=1).to_dict()
    assert serial == simulation.run_size_power(spec, workers=1).to_dict()
    assert serial == simulation.run_size_power(spec, workers=2, chunk_size=1).to_dict()


def test_seed_changes_the_summary():
    first = simulation.run_size_power(_scenario(seed=1), workers=1)
    second = simulation.run_size_power(_scenario(seed=2), workers=1)
    assert first.cells[0].statistic_mean != second.cells[0].statistic_mean


def test_scenario_parse_errors():
    with pytest.raises(DataError, match="required key"):
        ScenarioSpec.from_mapping({"scenario": {"n": 10, "p": 2}})
    with pytest.raises(DataError, match="unknown generator"):
        _scenario(generator={"kind": "cauchy"})
    with pytest.raises(DataError, match="rho0"):
        _scenario(tests=[{"kind": "equicorr-fixed"}])
    with pytest.raises(DataError, match="order"):
        _scenario(tests=[{"kind": "specified", "r0": [[1.0, 0.0], [0.0, 1.0]]}])
    with pytest.raises(DataError, match="more than once"):
        _scenario(generator={"kind": "gaussian", "clean": {"rho": 0.2, "pair": [0, 1, 0.3]}})
    with pytest.raises(DataError, match="contamination"):
        _scenario(generator={"kind": "contaminated"})


def test_scenario_generator_spellings():
    spec = _scenario(generator={"kind": "gaussian", "clean": {"pair": [0, 2, 0.4], "sigma2": [1.0, 2.0, 3.0]}})
    assert spec.generator.clean.corr[0, 2] == pytest.approx(0.4)
    assert_array_equal(spec.generator.clean.sigma2, [1.0, 2.0, 3.0])

    contaminated = _scenario(
        generator={"kind": "contaminated", "contamination": {"epsilon": 0.1, "kind": "point", "point": 4.0}},
    )
    assert_array_equal(contaminated.generator.point, [4.0, 4.0, 4.0])
    assert contaminated.generator.describe() == "contaminated(point, epsilon=0.1)"


@pytest.mark.slow
def test_null_calibration():
    spec = _scenario(
        n=500,
        p=4,
        replications=2000,
        seed=20240611,
        beta=[0.0, 0.3],
        tests=[{"kind": "independence"}, {"kind": "equicorr-free"}],
    )
    summary = simulation.run_size_power(spec, workers=2)
    critical = 1.63 / math.sqrt(spec.replications)
    for cell in summary.cells:
        assert cell.failure_count == 0
        assert cell.rejection_rate == pytest.approx(0.05, abs=0.02), cell
        assert cell.ks_distance is not None
        assert cell.ks_distance < critical, cell


@pytest.mark.slow
def test_power_against_one_correlated_pair():
    spec = _scenario(
        n=500,
        p=4,
        replications=200,
        beta=[0.0, 0.3],
        generator={"kind": "gaussian", "clean": {"pair": [0, 1, 0.5]}},
        tests=[{"kind": "independence"}],
    )
    summary = simulation.run_size_power(spec, workers=2)
    for cell in summary.cells:
        assert cell.rejection_rate > 0.9, cell


@pytest.mark.slow
def test_robust_size_under_point_contamination():
    spec = _scenario(
        n=500,
        p=4,
        replications=1000,
        seed=7,
        beta=[0.0, 0.5],
        generator={
            "kind": "contaminated",
            "contamination": {"epsilon": 0.1, "kind": "point", "point": [5.0, 5.0, 5.0, 5.0]},
        },
        tests=[{"kind": "independence"}],
    )
    summary = simulation.run_size_power(spec, workers=2)
    assert summary.cell(HypothesisKind.independence, 0.0).rejection_rate > 0.5
    assert 0.01 <= summary.cell(HypothesisKind.independence, 0.5).rejection_rate <= 0.15


@pytest.mark.slow
def test_free_equicorrelation_inflates_away_from_zero():
    # the free-equicorrelation statistic is calibrated at rho = 0 only; at rho = 0.5 its mean sits well above df.
    cells = {}
    for rho in (0.0, 0.5):
        spec = _scenario(
            n=500,
            p=4,
            replications=1000,
            seed=11,
            beta=[0.0],
            generator={"kind": "gaussian", "clean": {"rho": rho}},
            tests=[{"kind": "equicorr-free"}],
        )
        cells[rho] = simulation.run_size_power(spec, workers=2).cell(HypothesisKind.equicorr_free, 0.0)

    calibrated, inflated = cells[0.0], cells[0.5]
    assert calibrated.df == inflated.df == 5
    assert calibrated.statistic_mean == pytest.approx(5.0, abs=0.5)
    assert calibrated.ks_distance < 1.63 / math.sqrt(1000)
    assert inflated.statistic_mean > 6.5
    assert inflated.ks_distance > 1.63 / math.sqrt(1000)
