import math

import numpy as np
import pytest

from excurset.field import FieldStack, Lattice, ScalarField
from excurset.glm import GlmFit


def make_fit(mu, sigma, n=16, rng=None):
    """GlmFit with prescribed mu_hat / sigma_hat fields.

    Mirrors the intercept-only relationships (se = sigma / sqrt(n),
    tau_n = 1/sqrt(n)); residuals are filled with valid standardized noise
    unless a generator is supplied for reproducible ones.
    """
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64) * np.ones_like(mu)
    lattice = Lattice(mu.shape[1], mu.shape[0])
    rng = rng or np.random.default_rng(0)
    raw = rng.standard_normal((n, *mu.shape))
    raw -= raw.mean(axis=0)
    raw /= raw.std(axis=0, ddof=1)
    return GlmFit(
        mu_hat=ScalarField(lattice, mu),
        se=ScalarField(lattice, sigma / math.sqrt(n)),
        sigma_hat=ScalarField(lattice, sigma),
        tau_n=1.0 / math.sqrt(n),
        residuals=FieldStack(lattice, raw),
        n=n,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
