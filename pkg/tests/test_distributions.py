from math import comb, exp, factorial

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from mimo_bc.channel import batch_modes, rng_stream, sample_channels
from mimo_bc.distributions import (
    DistributionSpec,
    Family,
    frobenius_tail,
    incomplete_beta,
    incomplete_beta_step,
    lambda_max_tail,
    laguerre,
    overlap_cdf,
    overlap_pdf,
    projection_beta_cdf,
    projection_beta_pdf,
    wishart_unordered_eig_pdf,
)


def binomial_beta(x, r, s):
    """I_x(r, s) for integer r, s as a binomial tail sum."""
    n = r + s - 1
    return sum(comb(n, j) * x**j * (1 - x) ** (n - j) for j in range(r, n + 1))


def two_by_two_marginal(lam, M):
    """Unordered eigenvalue density of a 2 x 2 complex Wishart with M
    degrees of freedom, by integrating the joint eigenvalue density
    (l1 - l2)^2 (l1 l2)^(M-2) e^{-l1 - l2}."""
    def joint(a, b):
        return (a - b) ** 2 * (a * b) ** (M - 2) * np.exp(-a - b)

    norm = integrate.dblquad(lambda b, a: joint(a, b), 0, 60, 0, 60)[0]
    return 2 * integrate.quad(lambda b: joint(lam, b), 0, 60)[0] / (2 * norm)


def test_laguerre_explicit_sum():
    # L_n^a(x) = sum_k (-1)^k C(n + a, n - k) x^k / k!
    x = np.linspace(0, 12, 25)
    for n in range(5):
        for a in range(4):
            ref = sum((-1) ** k * comb(n + a, n - k) * x**k / factorial(k) for k in range(n + 1))
            assert np.allclose(laguerre(n, a, x), ref)


def test_wishart_examples():
    assert wishart_unordered_eig_pdf(1.0, 2, 1) == pytest.approx(exp(-1))
    assert wishart_unordered_eig_pdf(0.0, 1, 1) == pytest.approx(1.0)
    val = integrate.quad(lambda x: wishart_unordered_eig_pdf(x, 3, 2), 0, 50, limit=200)[0]
    assert abs(val - 1) < 1e-6


@pytest.mark.parametrize("M", [2, 3])
def test_wishart_against_joint_density(M):
    for lam in (0.5, 2.0, 5.0):
        assert wishart_unordered_eig_pdf(lam, M, 2) == pytest.approx(two_by_two_marginal(lam, M), rel=1e-5)


@pytest.mark.parametrize("M,K", [(1, 1), (2, 1), (2, 2), (4, 2), (5, 3), (8, 8)])
def test_wishart_normalized(M, K):
    val = integrate.quad(lambda x: wishart_unordered_eig_pdf(x, M, K), 0, 120, limit=400)[0]
    assert abs(val - 1) < 1e-6


def test_wishart_domain_errors():
    with pytest.raises(ValueError):
        wishart_unordered_eig_pdf(-1.0, 2, 1)
    with pytest.raises(ValueError):
        wishart_unordered_eig_pdf(1.0, 1, 2)
    with pytest.raises(ValueError):
        wishart_unordered_eig_pdf(1.0, 9, 1)


def test_wishart_histogram():
    H = sample_channels(200_000, 2, 3, rng_stream(21))
    lam = batch_modes(H)[0].ravel()
    edges = np.linspace(0, 10, 21)
    emp = np.histogram(lam, edges)[0] / lam.size
    exact = [integrate.quad(lambda x: wishart_unordered_eig_pdf(x, 3, 2), a, b)[0] for a, b in zip(edges[:-1], edges[1:])]
    assert np.max(np.abs(emp - exact)) < 0.004


def test_lambda_max_tail_examples():
    assert lambda_max_tail(2.0, 1, 1) == pytest.approx(exp(-2))
    assert lambda_max_tail(8.0, 2, 2) == pytest.approx(64 * exp(-8))
    N = 1234
    assert lambda_max_tail(np.log(N), 1, 1) == pytest.approx(1 / N)
    assert lambda_max_tail(-1.0, 2, 2) == 1.0
    assert lambda_max_tail(0.5, 8, 8) <= 1.0


def test_lambda_max_tail_monte_carlo_t8():
    H = sample_channels(2_000_000, 2, 2, rng_stream(22))
    G = H @ np.swapaxes(H.conj(), 1, 2)
    lam = np.linalg.eigvalsh(G)[:, -1]
    p = np.mean(lam > 8.0)
    assert lambda_max_tail(8.0, 2, 2) == pytest.approx(p, rel=0.15)


def test_frobenius_tail_examples():
    assert frobenius_tail(3.0, 1, 1) == pytest.approx(exp(-3))
    assert frobenius_tail(0.0, 3, 2) == 1.0
    assert frobenius_tail(1.0, 2, 1) == pytest.approx(2 * exp(-1))
    with pytest.raises(ValueError):
        frobenius_tail(-1.0, 1, 1)


@given(st.integers(1, 4), st.integers(1, 4), st.floats(0, 40))
def test_frobenius_tail_is_poisson_sum(M, K, x):
    # Erlang tail: at most MK - 1 Poisson(x) arrivals
    ref = exp(-x) * sum(x**m / factorial(m) for m in range(M * K))
    assert frobenius_tail(x, M, K) == pytest.approx(ref, abs=1e-12)


@given(st.integers(1, 4), st.integers(1, 4), st.floats(-5, 40), st.floats(0, 5))
def test_tails_non_increasing(M, K, t, dt):
    assert lambda_max_tail(t + dt, M, K) <= lambda_max_tail(t, M, K) + 1e-15
    if t >= 0:
        assert frobenius_tail(t + dt, M, K) <= frobenius_tail(t, M, K) + 1e-15


def test_overlap_examples():
    assert overlap_pdf(0.3, 2) == 1.0
    assert overlap_pdf(0.0, 4) == 3.0
    assert overlap_cdf(1.0, 5) == 1.0
    assert overlap_cdf(0.25, 3) == pytest.approx(1 - 0.75**2)
    with pytest.raises(ValueError):
        overlap_pdf(1.2, 3)
    with pytest.raises(ValueError):
        overlap_pdf(0.5, 1)


@pytest.mark.parametrize("M", range(2, 9))
def test_overlap_normalized_and_cdf(M):
    assert integrate.quad(lambda z: overlap_pdf(z, M), 0, 1)[0] == pytest.approx(1, abs=1e-6)
    for z in (0.1, 0.5, 0.9):
        assert overlap_cdf(z, M) == pytest.approx(integrate.quad(lambda u: overlap_pdf(u, M), 0, z)[0], abs=1e-10)


def test_projection_examples():
    assert projection_beta_pdf(0.4, 1, 2) == pytest.approx(1.0)
    for i, M in ((1, 3), (2, 3), (2, 5), (3, 7)):
        assert integrate.quad(lambda z: projection_beta_pdf(z, i, M), 0, 1)[0] == pytest.approx(1, abs=1e-6)
        mean = integrate.quad(lambda z: z * projection_beta_pdf(z, i, M), 0, 1)[0]
        assert mean == pytest.approx(i / M, abs=1e-8)
    with pytest.raises(ValueError):
        projection_beta_pdf(0.5, 3, 3)


@pytest.mark.parametrize("M", range(2, 9))
def test_first_incomplete_beta_identity(M):
    for x in (0.05, 0.3, 0.77):
        quad = integrate.quad(lambda z: projection_beta_pdf(z, 1, M), 0, x)[0]
        assert quad == pytest.approx(1 - (1 - x) ** (M - 1), abs=1e-10)
        assert incomplete_beta(x, 1, M - 1) == pytest.approx(1 - (1 - x) ** (M - 1), abs=1e-12)


def test_incomplete_beta_matches_binomial_sum():
    for r in range(1, 8):
        for s in range(1, 9 - r):
            for x in np.linspace(0, 1, 11):
                assert incomplete_beta(x, r, s) == pytest.approx(binomial_beta(x, r, s), abs=1e-12)
                assert projection_beta_cdf(x, r, r + s) == pytest.approx(binomial_beta(x, r, s), abs=1e-12)


def test_incomplete_beta_step_recursion():
    worst = 0.0
    for r in range(1, 8):
        for s in range(2, 9 - r):
            for x in np.linspace(0, 1, 41):
                lhs = binomial_beta(x, r, s) - binomial_beta(x, r + 1, s - 1)
                worst = max(worst, abs(lhs - incomplete_beta_step(x, r, s)))
                assert incomplete_beta_step(x, r, s) >= 0
    assert worst < 1e-10


def test_step_coefficient_by_hand():
    # I_{1,2}(x) - I_{2,1}(x) = 2x(1-x)
    assert incomplete_beta_step(0.3, 1, 2) == pytest.approx(2 * 0.3 * 0.7)


def test_distribution_spec():
    spec = DistributionSpec("overlap", 4)
    assert spec.family is Family.OVERLAP
    assert spec(0.0) == 3.0
    assert spec.cdf(1.0) == 1.0
    assert DistributionSpec(Family.LAMBDA_MAX_TAIL, 1, 1)(2.0) == pytest.approx(exp(-2))
    assert DistributionSpec(Family.FROBENIUS_TAIL, 2, 1).cdf(1.0) == pytest.approx(1 - 2 * exp(-1))
    assert DistributionSpec(Family.PROJECTION_BETA, 3, i=1)(0.0) == pytest.approx(2.0)
    assert DistributionSpec(Family.WISHART_UNORDERED, 2, 1)(1.0) == pytest.approx(exp(-1))
    with pytest.raises(ValueError):
        DistributionSpec(Family.PROJECTION_BETA, 3, i=3)
    with pytest.raises(ValueError):
        DistributionSpec(Family.OVERLAP, 0)
    with pytest.raises(ValueError):
        DistributionSpec(Family.WISHART_UNORDERED, 2).cdf(1.0)
