"""
Closed-form densities and tail probabilities used as oracles for the Monte
Carlo checks.

All functions accept scalars or numpy arrays for the continuous argument.
Integer parameters (M, K, i) are limited to 8 so that factorials and
Laguerre coefficients stay comfortably inside double range.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from math import factorial, gamma, lgamma

import numpy as np
from scipy import special

__all__ = [
    "Family",
    "DistributionSpec",
    "laguerre",
    "wishart_unordered_eig_pdf",
    "lambda_max_tail",
    "frobenius_tail",
    "overlap_pdf",
    "overlap_cdf",
    "projection_beta_pdf",
    "projection_beta_cdf",
    "incomplete_beta",
    "incomplete_beta_step",
]

MAX_DIM = 8


def _check_dims(**dims: int) -> None:
    for name, value in dims.items():
        if int(value) != value or value < 1:
            raise ValueError(f"{name} must be a positive integer, got {value}")
        if value > MAX_DIM:
            raise ValueError(f"{name}={value} exceeds the supported maximum {MAX_DIM}")


def _unit_interval(z, what: str) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if np.any((z < 0) | (z > 1)) or np.any(np.isnan(z)):
        raise ValueError(f"{what} must lie in [0, 1]")
    return z


def _ret(x):
    return float(x) if np.ndim(x) == 0 else x


def laguerre(n: int, alpha: int, x) -> np.ndarray:
    """Associated Laguerre polynomial L_n^alpha(x)."""
    return special.eval_genlaguerre(n, alpha, np.asarray(x, dtype=float))


def wishart_unordered_eig_pdf(lam, M: int, K: int):
    """Density of an unordered eigenvalue of H H^* for K x M complex Gaussian H.

    f(lam) = 1/K sum_{i<K} i!/(M-K+i)! [L_i^{M-K}(lam)]^2 lam^{M-K} e^{-lam}
    """
    _check_dims(M=M, K=K)
    if K > M:
        raise ValueError(f"requires K <= M, got K={K}, M={M}")
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("eigenvalue density is defined for lam >= 0")
    alpha = M - K
    acc = np.zeros_like(lam)
    for i in range(K):
        acc = acc + factorial(i) / factorial(alpha + i) * laguerre(i, alpha, lam) ** 2
    return _ret(acc * lam**alpha * np.exp(-lam) / K)


def lambda_max_tail(t, M: int, K: int):
    """Leading-order tail Prob{lambda_max > t} ~ t^{M+K-2} e^{-t} / (Gamma(M) Gamma(K)).

    This is an asymptotic (large t) approximation; the relative correction is
    O(1/t). The leading term rises on (0, M+K-2), so below that point it is
    held at its peak value to keep the function non-increasing. The result
    is clipped to [0, 1] and equals 1 for t <= 0.
    """
    _check_dims(M=M, K=K)
    t = np.asarray(t, dtype=float)
    a = M + K - 2
    s = np.maximum(t, a)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        val = np.where(t > 0, np.power(s, a) * np.exp(-s) / (gamma(M) * gamma(K)), 1.0)
    return _ret(np.clip(val, 0.0, 1.0))


def frobenius_tail(x, M: int, K: int):
    """Prob{|H|_F^2 > x} = e^{-x} sum_{m < MK} x^m / m!."""
    _check_dims(M=M, K=K)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("frobenius_tail requires x >= 0")
    # |H|_F^2 is Gamma(MK, 1), so the tail is the regularized upper gamma
    return _ret(special.gammaincc(M * K, x))


def overlap_pdf(z, M: int):
    """Density (M-1)(1-z)^{M-2} of |phi_i^* phi_j|^2 for isotropic unit phi in C^M."""
    if M < 2:
        raise ValueError("overlap density needs M >= 2")
    _check_dims(M=M)
    z = _unit_interval(z, "overlap")
    return _ret((M - 1) * (1.0 - z) ** (M - 2))


def overlap_cdf(z, M: int):
    """CDF 1 - (1-z)^{M-1} of the overlap distribution."""
    if M < 2:
        raise ValueError("overlap distribution needs M >= 2")
    _check_dims(M=M)
    z = _unit_interval(z, "overlap")
    return _ret(1.0 - (1.0 - z) ** (M - 1))


def _check_projection(i: int, M: int) -> None:
    _check_dims(M=M)
    if not 1 <= i <= M - 1:
        raise ValueError(f"projection dimension i must lie in [1, M-1], got i={i}, M={M}")


def projection_beta_pdf(z, i: int, M: int):
    """Beta(i, M-i) density of the squared norm of an isotropic unit vector's
    projection onto a fixed i-dimensional subspace of C^M."""
    _check_projection(i, M)
    z = _unit_interval(z, "projection")
    coef = np.exp(lgamma(M) - lgamma(i) - lgamma(M - i))
    with np.errstate(divide="ignore"):
        val = coef * z ** (i - 1) * (1.0 - z) ** (M - i - 1)
    return _ret(val)


def projection_beta_cdf(z, i: int, M: int):
    _check_projection(i, M)
    z = _unit_interval(z, "projection")
    return _ret(special.betainc(i, M - i, z))


def incomplete_beta(x, r: int, s: int):
    """Regularized incomplete beta function I_{r,s}(x)."""
    if r < 1 or s < 1:
        raise ValueError("incomplete beta parameters must be positive")
    x = _unit_interval(x, "x")
    return _ret(special.betainc(r, s, x))


def incomplete_beta_step(x, r: int, s: int):
    """I_{r,s}(x) - I_{r+1,s-1}(x) in closed form,

    Gamma(r+s) x^r (1-x)^{s-1} / (Gamma(r+1) Gamma(s)),

    which is non-negative, so I_{r,s} >= I_{r+1,s-1} on [0, 1].
    """
    if r < 1 or s < 2:
        raise ValueError("step needs r >= 1 and s >= 2")
    x = _unit_interval(x, "x")
    coef = np.exp(lgamma(r + s) - lgamma(r + 1) - lgamma(s))
    return _ret(coef * x**r * (1.0 - x) ** (s - 1))


class Family(str, Enum):
    WISHART_UNORDERED = "wishart_unordered"
    LAMBDA_MAX_TAIL = "lambda_max_tail"
    FROBENIUS_TAIL = "frobenius_tail"
    OVERLAP = "overlap"
    PROJECTION_BETA = "projection_beta"


@dataclass(frozen=True)
class DistributionSpec:
    """A named member of one of the closed-form families above.

    ``__call__`` evaluates the density (for density families) or the tail
    probability (for the two tail families).
    """

    family: Family
    M: int
    K: int = 1
    i: int = 1

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        _check_dims(M=self.M, K=self.K)
        if self.family is Family.PROJECTION_BETA:
            _check_projection(self.i, self.M)

    def __call__(self, x):
        f = self.family
        if f is Family.WISHART_UNORDERED:
            return wishart_unordered_eig_pdf(x, self.M, self.K)
        if f is Family.LAMBDA_MAX_TAIL:
            return lambda_max_tail(x, self.M, self.K)
        if f is Family.FROBENIUS_TAIL:
            return frobenius_tail(x, self.M, self.K)
        if f is Family.OVERLAP:
            return overlap_pdf(x, self.M)
        return projection_beta_pdf(x, self.i, self.M)

    def cdf(self, x):
        """CDF for the overlap and projection families (used by KS tests)."""
        if self.family is Family.OVERLAP:
            return overlap_cdf(x, self.M)
        if self.family is Family.PROJECTION_BETA:
            return projection_beta_cdf(x, self.i, self.M)
        if self.family is Family.FROBENIUS_TAIL:
            return 1.0 - frobenius_tail(x, self.M, self.K)
        raise ValueError(f"no closed-form CDF for family {self.family.value}")
