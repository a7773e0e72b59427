import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from panelpmcmc.numeric import (DomainError, RngStream, bvn_cdf, chain_streams,
                                sample_truncated_normal, sample_wishart, std_normal_cdf,
                                std_normal_quantile, truncated_normal)

mpmath.mp.dps = 40


def mp_ncdf(x):
    return float(mpmath.ncdf(x))


def bvn_oracle(h, k, r):
    """Plackett's identity integrated with adaptive quadrature."""
    def dens(t):
        s = 1.0 - t * t
        return math.exp(-(h * h - 2 * t * h * k + k * k) / (2 * s)) / (2 * math.pi * math.sqrt(s))
    val, _ = integrate.quad(dens, 0.0, r, epsabs=1e-14, epsrel=1e-13, limit=200)
    return mp_ncdf(h) * mp_ncdf(k) + val


# ---------------------------------------------------------------- normal cdf

def test_cdf_at_zero():
    assert std_normal_cdf(0.0) == 0.5


def test_cdf_saturates():
    assert std_normal_cdf(40.0) == 1.0


def test_cdf_known_value():
    assert abs(std_normal_cdf(1.959964) - mp_ncdf(1.959964)) < 1e-15
    assert abs(std_normal_cdf(1.959964) - 0.975) < 1e-6


@given(st.floats(-37.0, 37.0))
def test_cdf_symmetry(x):
    assert abs(std_normal_cdf(x) + std_normal_cdf(-x) - 1.0) <= 1e-15


@given(st.floats(-30.0, 8.0))
def test_cdf_matches_mpmath(x):
    exact = mp_ncdf(x)
    assert abs(std_normal_cdf(x) - exact) <= 1e-15 + 1e-13 * exact


def test_cdf_monotone():
    x = np.linspace(-10, 10, 5001)
    assert np.all(np.diff(std_normal_cdf(x)) >= 0)


# ----------------------------------------------------------- normal quantile

def test_quantile_median():
    assert std_normal_quantile(0.5) == 0.0


def test_quantile_known_value():
    assert abs(std_normal_quantile(0.975) - 1.959964) < 1e-6


@pytest.mark.parametrize("p", [1e-8, 0.3, 1 - 1e-8])
def test_quantile_round_trip(p):
    assert abs(std_normal_cdf(std_normal_quantile(p)) - p) < 1e-12


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_quantile_domain(p):
    with pytest.raises(DomainError):
        std_normal_quantile(p)


@given(st.floats(1e-10, 1 - 1e-10))
def test_quantile_inverse_property(p):
    assert abs(std_normal_cdf(std_normal_quantile(p)) - p) <= 1e-12


# -------------------------------------------------------------- bivariate

def test_bvn_independence():
    assert abs(bvn_cdf(0.7, -0.3, 0.0) - std_normal_cdf(0.7) * std_normal_cdf(-0.3)) < 1e-15


def test_bvn_origin():
    assert abs(bvn_cdf(0.0, 0.0, 0.5) - 1.0 / 3.0) < 1e-15


def test_bvn_quadrature_oracle():
    h, k, r = 1.2, 0.4, -0.6
    f = lambda y, x: stats.multivariate_normal(cov=[[1, r], [r, 1]]).pdf([x, y])  # noqa: E731
    val, _ = integrate.dblquad(f, -12, h, -12, k, epsabs=1e-12)
    assert abs(bvn_cdf(h, k, r) - val) < 1e-8


@pytest.mark.parametrize("r", [-1.0, 1.0, 1.5, float("nan")])
def test_bvn_domain(r):
    with pytest.raises(DomainError):
        bvn_cdf(0.1, 0.2, r)


@given(st.floats(-8, 8), st.floats(-8, 8), st.floats(-0.999, 0.999))
def test_bvn_accuracy(h, k, r):
    assert abs(bvn_cdf(h, k, r) - bvn_oracle(h, k, r)) <= 1e-10


@given(st.floats(-8, 8), st.floats(-8, 8), st.floats(-0.99, 0.99))
def test_bvn_symmetric(h, k, r):
    assert abs(bvn_cdf(h, k, r) - bvn_cdf(k, h, r)) <= 1e-15


def test_bvn_monotone_on_grid():
    g = np.linspace(-4, 4, 41)
    for r in (-0.95, -0.5, 0.0, 0.3, 0.93, 0.99):
        H, K = np.meshgrid(g, g, indexing="ij")
        V = bvn_cdf(H, K, r)
        assert np.all(np.diff(V, axis=0) >= -1e-15)
        assert np.all(np.diff(V, axis=1) >= -1e-15)
    rs = np.linspace(-0.99, 0.99, 199)
    for h, k in ((0.3, -0.2), (-1.5, 2.0), (1.0, 1.0)):
        assert np.all(np.diff(bvn_cdf(h, k, rs)) >= -1e-15)


@given(st.floats(-8, 8), st.floats(-0.99, 0.99))
def test_bvn_marginalizes(h, r):
    assert abs(bvn_cdf(h, 40.0, r) - std_normal_cdf(h)) <= 1e-10


# ------------------------------------------------------- truncated normal

def test_truncnorm_untruncated_is_normal():
    rng = RngStream(1, 0).generator()
    x = truncated_normal(np.zeros(100_000), 1.0, -np.inf, np.inf, rng)
    assert stats.kstest(x, "norm").pvalue > 0.01


def test_truncnorm_half_normal_mean():
    rng = RngStream(2, 0).generator()
    x = truncated_normal(np.zeros(100_000), 1.0, 0.0, np.inf, rng)
    assert np.all(x > 0)
    assert abs(x.mean() - math.sqrt(2 / math.pi)) < 0.01


def test_truncnorm_far_tail():
    rng = RngStream(3, 0).generator()
    x = truncated_normal(np.full(20_000, 5.0), 1.0, -np.inf, 0.0, rng)
    assert np.all(x < 0)
    # the conditional law is a shifted exponential-like tail; compare with scipy
    ref = stats.truncnorm(-np.inf, -5.0, loc=5.0)
    assert stats.kstest(x, ref.cdf).pvalue > 0.01


@pytest.mark.parametrize("a,b", [(-1.0, 0.5), (2.0, np.inf), (-np.inf, -6.0), (8.0, 9.0)])
def test_truncnorm_matches_scipy(a, b):
    rng = RngStream(4, 1).generator()
    x = truncated_normal(np.zeros(20_000), 1.0, a, b, rng)
    assert np.all((x > a) & (x < b))
    assert stats.kstest(x, stats.truncnorm(a, b).cdf).pvalue > 0.01


def test_truncnorm_scalar_and_errors():
    rng = RngStream(5, 0).generator()
    v = sample_truncated_normal(0.0, 2.0, 1.0, 1.5, rng)
    assert 1.0 < v < 1.5
    with pytest.raises(DomainError):
        sample_truncated_normal(0.0, 1.0, 1.0, 1.0, rng)
    with pytest.raises(DomainError):
        sample_truncated_normal(0.0, 1.0, 2.0, 1.0, rng)


# ----------------------------------------------------------------- Wishart

def test_wishart_mean():
    rng = RngStream(6, 0).generator()
    W = np.array([sample_wishart(6, np.eye(2), rng) for _ in range(100_000)])
    assert np.all(np.abs(W.mean(axis=0) - 6 * np.eye(2)) < 0.02 * 6)
    assert np.all(np.linalg.det(W) > 0)


def test_wishart_variance():
    rng = RngStream(7, 0).generator()
    W = np.array([sample_wishart(2, np.diag([1.0, 4.0]), rng) for _ in range(100_000)])
    assert abs(W[:, 0, 0].var() - 4.0) < 0.05 * 4.0


def test_wishart_domain():
    rng = RngStream(8, 0).generator()
    with pytest.raises(DomainError):
        sample_wishart(6, np.array([[1.0, 2.0], [2.0, 1.0]]), rng)


# --------------------------------------------------------------- streams

def test_streams_reproducible():
    a = RngStream(11, 5).generator().random(10)
    b = RngStream(11, 5).generator().random(10)
    assert np.array_equal(a, b)


def test_streams_distinct_and_uncorrelated():
    a = RngStream(11, 5).generator().standard_normal(100_000)
    b = RngStream(11, 6).generator().standard_normal(100_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(100_000)


def test_chain_streams_layout():
    c0, ind0 = chain_streams(3, 0, 4)
    c1, ind1 = chain_streams(3, 1, 4)
    assert len(ind0) == 4
    draws = [g.random() for g in [c0, c1] + ind0 + ind1]
    assert len(set(draws)) == len(draws)
    # individual streams do not depend on how many individuals exist
    _, ind_more = chain_streams(3, 0, 10)
    assert ind_more[2].random() == RngStream(3, 3).generator().random()
