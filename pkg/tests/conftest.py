from __future__ import annotations

import numpy as np
import pytest
from scipy import linalg

from utilities.matrix_ops import validate_correlation


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240917)


def random_correlation(rng: np.random.Generator, p: int, *, strength: float = 0.4) -> np.ndarray:
    """A well-conditioned random correlation matrix."""
    a = rng.normal(size=(p, p))
    cov = np.eye(p) + strength * (a @ a.T) / p
    sd = np.sqrt(np.diag(cov))
    return validate_correlation(cov / np.outer(sd, sd))


def gaussian_sample(
    rng: np.random.Generator,
    n: int,
    corr: np.ndarray,
    *,
    mu: np.ndarray | None = None,
    sigma2: np.ndarray | None = None,
) -> np.ndarray:
    p = corr.shape[0]
    mu = np.zeros(p) if mu is None else mu
    sd = np.ones(p) if sigma2 is None else np.sqrt(sigma2)
    z = rng.standard_normal((n, p)) @ linalg.cholesky(corr, lower=True).T
    return mu + z * sd


def pearson(sample: np.ndarray) -> np.ndarray:
    return np.corrcoef(sample, rowvar=False)
