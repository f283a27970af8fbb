import math

import numpy as np
import pytest
from scipy import integrate, stats


def expected_gaussian_norm(m):
    """E||g||_2 by integrating r against the chi density with m degrees of freedom."""
    log_c = (1 - m / 2) * math.log(2) - math.lgamma(m / 2)
    f = lambda r: r * math.exp(log_c + (m - 1) * math.log(r) - r * r / 2) if r > 0 else 0.0
    return integrate.quad(f, 0, math.inf, epsabs=1e-13, epsrel=1e-13, limit=200)[0]


def expected_abs_normal():
    """E|g| for a single standard normal, by quadrature."""
    return 2 * integrate.quad(lambda x: x * stats.norm.pdf(x), 0, math.inf, epsabs=1e-14)[0]


def expected_max_abs(m):
    """E max_i |g_i| = int_0^inf P(max |g_i| > t) dt."""
    f = lambda t: 1 - (2 * stats.norm.cdf(t) - 1) ** m
    return integrate.quad(f, 0, math.inf, epsabs=1e-13, epsrel=1e-13, limit=200)[0]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
