"""
This Source Code Form is subject to the terms of the Mozilla Public
License, v. 2.0. If a copy of the MPL was not distributed with this
file, You can obtain one at http://mozilla.org/MPL/2.0/.

Monte-Carlo size and power experiments.

Replication ``r`` of a scenario draws from ``SeedSequence(seed, spawn_key=(r,))``, so every replication is a pure
function of the root seed and its index and summaries do not depend on how many workers ran them.
"""

from __future__ import annotations

import functools
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from typing import TYPE_CHECKING, NamedTuple

import numpy as np
import psutil
from scipy import stats

from .constants import WORKERS_ENV_VAR
from .containers.reports import CellSummary, MonteCarloSummary
from .exceptions import DomainError, EmptySummaryError, RaoError
from .flags import Contaminant, Generator
from .score_tests import run_test

if TYPE_CHECKING:
    from collections.abc import Sequence

    import numpy.typing as npt

    from .containers.fits import FitConfig
    from .containers.params import GaussianParams
    from .containers.scenario import GeneratorSpec, NullSpec, ScenarioSpec
    from .matrix_ops import FloatArray

__all__ = (
    "correlation_with_pair",
    "draw_sample",
    "ks_calibration",
    "replication_rng",
    "resolve_workers",
    "run_size_power",
    "sample_contaminated",
    "sample_heavy_tailed",
    "sample_mvn",
)

LOGGER = logging.getLogger(__name__)

type Seed = int | np.random.Generator


class _Outcome(NamedTuple):
    statistic: float = math.nan
    p_value: float = math.nan
    failure: str | None = None


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replication,)))


def _generator(seed: Seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def correlation_with_pair(p: int, i: int, j: int, rho: float) -> FloatArray:
    """The identity correlation of order ``p`` with entries ``(i, j)`` and ``(j, i)`` set to ``rho`` (0-based)."""
    if not (0 <= i < p and 0 <= j < p) or i == j:
        raise DomainError(f"pair ({i}, {j}) is not an off-diagonal position of a {p} x {p} matrix.")
    if not abs(rho) < 1:
        raise DomainError(f"pair correlation must lie in (-1, 1), got {rho!r}.")
    corr = np.eye(p)
    corr[i, j] = corr[j, i] = rho
    return corr


def sample_mvn(n: int, params: GaussianParams, seed: Seed) -> FloatArray:
    """``n`` rows of ``μ + L z`` with ``L`` the Cholesky factor of ``Σ``."""
    rng = _generator(seed)
    z = rng.standard_normal((n, params.p))
    return params.mu + z @ params.cholesky.T


def sample_heavy_tailed(n: int, params: GaussianParams, df: float, seed: Seed) -> FloatArray:
    """Multivariate t rows: each centred Gaussian row is scaled by ``√(ν / χ²_ν)``."""
    if not df > 0:
        raise DomainError(f"degrees of freedom must be positive, got {df!r}.")
    rng = _generator(seed)
    z = rng.standard_normal((n, params.p)) @ params.cholesky.T
    scale = np.sqrt(df / rng.chisquare(df, size=n))
    return params.mu + z * scale[:, np.newaxis]


def sample_contaminated(n: int, spec: GeneratorSpec, seed: Seed) -> FloatArray:
    """Each row comes from the contaminant with probability ``ε``, otherwise from the clean normal.

    The clean draws come first, so ``ε = 0`` reproduces ``sample_mvn`` under the same seed.
    """
    if not 0 <= spec.epsilon < 1:
        raise DomainError(f"contamination weight must lie in [0, 1), got {spec.epsilon!r}.")
    clean = spec.clean
    rng = _generator(seed)
    z = rng.standard_normal((n, clean.p)) @ clean.cholesky.T
    x = clean.mu + z
    mask = rng.random(n) < spec.epsilon
    if not mask.any():
        return x

    match spec.contaminant:
        case Contaminant.shift:
            x[mask] += spec.shift if spec.shift is not None else 0.0
        case Contaminant.scale:
            x[mask] = clean.mu + math.sqrt(spec.factor) * z[mask]
        case Contaminant.point:
            x[mask] = spec.point if spec.point is not None else clean.mu
        case None:
            raise DomainError("a contaminated generator needs a contaminant kind.")
    return x


def draw_sample(spec: GeneratorSpec, n: int, seed: Seed) -> FloatArray:
    match spec.kind:
        case Generator.gaussian:
            return sample_mvn(n, spec.clean, seed)
        case Generator.contaminated:
            return sample_contaminated(n, spec, seed)
        case Generator.heavy_tailed:
            return sample_heavy_tailed(n, spec.clean, spec.df or 0.0, seed)


def _chi2_cdf_df2(x: npt.ArrayLike) -> FloatArray:
    return -np.expm1(-np.asarray(x, dtype=np.float64) / 2)


def ks_calibration(statistics: npt.ArrayLike, df: int) -> float:
    """Kolmogorov-Smirnov distance between the empirical distribution of ``statistics`` and ``χ²_df``."""
    values = np.asarray(statistics, dtype=np.float64).ravel()
    if values.size == 0:
        raise EmptySummaryError("cannot calibrate an empty set of statistics.")
    if df < 1:
        raise DomainError(f"degrees of freedom must be a positive integer, got {df!r}.")
    if df == 2:
        return float(stats.kstest(values, _chi2_cdf_df2).statistic)
    return float(stats.kstest(values, "chi2", args=(df,)).statistic)


def resolve_workers(explicit: int | None = None, configured: int | None = None) -> int:
    """Worker count: explicit argument, then ``RAO_THREADS``, then configuration, then the physical core count."""
    if explicit is not None:
        chosen = explicit
    elif env := os.environ.get(WORKERS_ENV_VAR):
        try:
            chosen = int(env)
        except ValueError as exc:
            raise DomainError(f"{WORKERS_ENV_VAR} must be an integer, got {env!r}.") from exc
    elif configured is not None:
        chosen = configured
    else:
        chosen = psutil.cpu_count(logical=False) or 1

    if chosen < 1:
        raise DomainError(f"worker count must be at least 1, got {chosen}.")
    return chosen


def _cells(spec: ScenarioSpec) -> list[tuple[NullSpec, float | None]]:
    return [(test, beta) for test in spec.tests for beta in (spec.betas if test.kind.uses_beta else (None,))]


def _replicate(spec: ScenarioSpec, cfg: FitConfig | None, replication: int) -> list[_Outcome]:
    x = draw_sample(spec.generator, spec.n, replication_rng(spec.seed, replication))
    outcomes: list[_Outcome] = []
    for test, beta in _cells(spec):
        try:
            report = run_test(test.kind, x, beta, cfg, r0=test.r0, rho0=test.rho0)
        except (RaoError, np.linalg.LinAlgError) as exc:
            outcomes.append(_Outcome(failure=type(exc).__name__))
        else:
            outcomes.append(_Outcome(statistic=report.statistic, p_value=report.p_value))
    return outcomes


def _summarise_cell(
    test: NullSpec,
    beta: float | None,
    outcomes: Sequence[_Outcome],
    *,
    p: int,
    alpha: float,
) -> CellSummary:
    failures: dict[str, int] = {}
    values: list[float] = []
    rejections = 0
    for outcome in outcomes:
        if outcome.failure is not None:
            failures[outcome.failure] = failures.get(outcome.failure, 0) + 1
            continue
        values.append(outcome.statistic)
        rejections += outcome.p_value < alpha

    completed = len(values)
    df = test.kind.degrees_of_freedom(p)
    rate = rejections / completed if completed else 0.0
    array = np.asarray(values)
    return CellSummary(
        kind=test.kind,
        label=test.label,
        beta=beta,
        df=df,
        replications=len(outcomes),
        completed=completed,
        rejections=rejections,
        rejection_rate=rate,
        standard_error=math.sqrt(rate * (1.0 - rate) / completed) if completed else 0.0,
        statistic_mean=float(array.mean()) if completed else None,
        statistic_variance=float(array.var(ddof=1)) if completed > 1 else None,
        ks_distance=ks_calibration(array, df) if completed and df >= 1 else None,
        failures=failures,
    )


def run_size_power(
    spec: ScenarioSpec,
    *,
    workers: int | None = None,
    chunk_size: int | None = None,
    cfg: FitConfig | None = None,
) -> MonteCarloSummary:
    """Run every configured test at every β on ``spec.replications`` independent samples and tally the results.

    Per-replication numerical failures are counted by error class rather than raised.
    """
    if spec.replications < 1:
        raise EmptySummaryError(f"scenario {spec.name!r} has no replications to summarise.")
    spec = spec.validate()
    workers = resolve_workers(workers)
    task = functools.partial(_replicate, spec, cfg)
    LOGGER.info(
        "[Simulation] -> %s :: %r replications of n=%r, p=%r on %r worker(s).",
        spec.name,
        spec.replications,
        spec.n,
        spec.p,
        workers,
    )

    if workers == 1:
        results = [task(r) for r in range(spec.replications)]
    else:
        chunk = chunk_size or max(1, spec.replications // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(task, range(spec.replications), chunksize=chunk))

    cells = tuple(
        _summarise_cell(test, beta, [result[index] for result in results], p=spec.p, alpha=spec.alpha)
        for index, (test, beta) in enumerate(_cells(spec))
    )
    for cell in cells:
        LOGGER.info(
            "[Simulation] -> %s :: %s beta=%r rejection rate %.4f (%r failures).",
            spec.name,
            cell.label,
            cell.beta,
            cell.rejection_rate,
            cell.failure_count,
        )

    return MonteCarloSummary(
        name=spec.name,
        n=spec.n,
        p=spec.p,
        replications=spec.replications,
        alpha=spec.alpha,
        seed=spec.seed,
        generator=spec.generator.describe(),
        cells=cells,
    )
