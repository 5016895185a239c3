import math

import numpy as np
import pytest
from scipy import special, stats

from jnnts._special import (log_ndtr, mixture_log_weights, mixture_ppf, ndtr, ndtri,
                            truncnorm_ppf)


@pytest.mark.parametrize("x", [-40.0, -35.0, -12.0, -3.0, -0.1, 0.0, 0.7, 4.0, 9.0])
def test_log_ndtr_matches_scipy(x):
    assert log_ndtr(x) == pytest.approx(special.log_ndtr(x), rel=1e-10)
    assert ndtr(x) == pytest.approx(special.ndtr(x), rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("p", [1e-300, 1e-20, 1e-5, 0.02, 0.3, 0.5, 0.9, 1 - 1e-9])
def test_ndtri_matches_scipy(p):
    assert ndtri(p) == pytest.approx(special.ndtri(p), rel=1e-12)


def test_truncnorm_ppf_matches_scipy(rng):
    for _ in range(300):
        a, b = np.sort(rng.normal(0, 4, 2))
        u = rng.random()
        expected = stats.truncnorm.ppf(u, a, b)
        assert truncnorm_ppf(u, a, b) == pytest.approx(expected, rel=1e-7, abs=1e-9)


@pytest.mark.parametrize("a,b", [(2.0, math.inf), (-math.inf, -2.0), (40.0, math.inf),
                                 (-math.inf, -45.0), (-1.0, 1.0)])
@pytest.mark.parametrize("u", [0.0, 1e-12, 0.5, 1 - 1e-12, 1.0])
def test_truncnorm_ppf_stays_in_interval(a, b, u):
    x = truncnorm_ppf(u, a, b)
    assert math.isfinite(x)
    assert a <= x <= b


def test_far_tail_is_monotone():
    xs = [truncnorm_ppf(u, 50.0, math.inf) for u in np.linspace(0.01, 0.99, 20)]
    assert np.all(np.diff(xs) > 0)
    assert xs[0] >= 50.0


def test_mixture_weights_normalized(rng):
    out = np.empty(3)
    for _ in range(200):
        mu, lam = rng.normal(0, 3), abs(rng.normal(0, 1))
        var = rng.uniform(0.01, 5)
        on, off = rng.normal(0, 1e4), rng.normal(0, 1e4)
        mixture_log_weights(mu, var, lam, on, off, out)
        assert abs(np.exp(out).sum() - 1.0) < 1e-12


def test_mixture_survives_extreme_log_likelihoods():
    out = np.empty(3)
    mixture_log_weights(0.0, 1.0, 1.0, -1e6, -2e6, out)
    assert np.exp(out[1]) == 0.0
    assert np.exp(out[0]) + np.exp(out[2]) == pytest.approx(1.0)


def test_flat_likelihood_gives_plain_normal():
    mu, var = 0.4, 2.0
    for u in np.linspace(0.001, 0.999, 37):
        x = mixture_ppf(u, mu, var, 0.8, 0.0, 0.0)
        assert x == pytest.approx(mu + math.sqrt(var) * special.ndtri(u), rel=1e-9, abs=1e-9)


def test_zero_threshold_gives_plain_normal():
    # the middle component has no mass whatever the likelihood says
    mu, var = -0.3, 0.5
    for u in np.linspace(0.01, 0.99, 15):
        x = mixture_ppf(u, mu, var, 0.0, 0.0, 3.0)
        assert x == pytest.approx(mu + math.sqrt(var) * special.ndtri(u), rel=1e-9, abs=1e-9)


def test_mixture_cdf_is_its_inverse():
    # compare against the mixture CDF built from scipy
    mu, var, lam, on, off = 0.2, 1.3, 0.9, -0.7, 0.4
    sd = math.sqrt(var)
    lo, hi = (-lam - mu) / sd, (lam - mu) / sd
    w = np.array([np.exp(on) * stats.norm.cdf(lo),
                  np.exp(off) * (stats.norm.cdf(hi) - stats.norm.cdf(lo)),
                  np.exp(on) * stats.norm.sf(hi)])
    w /= w.sum()

    def cdf(x):
        z = (x - mu) / sd
        c = w[0] * min(stats.norm.cdf(z) / stats.norm.cdf(lo), 1.0)
        if z > lo:
            c += w[1] * min((stats.norm.cdf(z) - stats.norm.cdf(lo))
                            / (stats.norm.cdf(hi) - stats.norm.cdf(lo)), 1.0)
        if z > hi:
            c += w[2] * (stats.norm.cdf(z) - stats.norm.cdf(hi)) / stats.norm.sf(hi)
        return c

    for u in np.linspace(0.005, 0.995, 41):
        assert cdf(mixture_ppf(u, mu, var, lam, on, off)) == pytest.approx(u, abs=1e-9)
