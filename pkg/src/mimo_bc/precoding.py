"""
Zero-forcing precoding over a selected coordinate matrix, power
allocation and sum rates (nats).

The coordinate matrix has one row per selected mode, g = sqrt(lam) V^*.
Effective noise gains are the diagonal of (G G^*)^{-1}, the inverse Gram of
the rows, which is also the per-stream transmit power cost of zero forcing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import SingularMatrixError

__all__ = [
    "COND_CAP",
    "CoordinateMatrix",
    "PowerAllocation",
    "RateSample",
    "SCHEMES",
    "coordinate_matrix",
    "zero_forcing_precode",
    "effective_noise_gammas",
    "waterfill_powers",
    "allocate_power",
    "sum_rate",
    "batch_gram_inverse_diag",
    "batch_waterfill",
    "batch_sum_rate",
]

COND_CAP = 1e10

SCHEMES = ("proposed_wf", "proposed_uniform", "exhaustive", "random_zf", "tdma", "random_dpc", "dpc_opt", "no_csi")


@dataclass(frozen=True)
class CoordinateMatrix:
    rows: np.ndarray
    eigenvalues: np.ndarray
    condition: float

    @property
    def singular(self) -> bool:
        return not self.condition <= COND_CAP

    def __len__(self) -> int:
        return int(self.rows.shape[0])


@dataclass(frozen=True)
class PowerAllocation:
    gammas: np.ndarray
    powers: np.ndarray
    total_power: float

    @property
    def used_power(self) -> float:
        return float(np.dot(self.gammas, self.powers))


@dataclass(frozen=True)
class RateSample:
    scheme: str
    rate_nats: float
    trial_id: int
    N: int
    M: int
    K: int
    P: float

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.rate_nats >= 0:
            raise ValueError(f"rate must be non-negative, got {self.rate_nats}")


def coordinate_matrix(sel, modes=None) -> CoordinateMatrix:
    """Stack g_i = sqrt(lam_i) V_i^* for the selected coordinates.

    ``sel`` is a :class:`~mimo_bc.selection.SelectionResult`; ``modes`` is
    accepted for symmetry with the selection call and ignored, since the
    result already carries the chosen eigenvalues and vectors.
    """
    if len(sel) == 0:
        raise ValueError("cannot build a coordinate matrix from an empty selection")
    lam = np.asarray(sel.eigenvalues, dtype=float)
    rows = np.sqrt(lam)[:, None] * np.asarray(sel.right).conj()
    s = np.linalg.svd(rows, compute_uv=False)
    cond = float(s[0] / s[-1]) if s[-1] > 0 else np.inf
    return CoordinateMatrix(rows, lam, cond)


def _as_rows(cm) -> np.ndarray:
    return cm.rows if isinstance(cm, CoordinateMatrix) else np.atleast_2d(np.asarray(cm, dtype=complex))


def _check_conditioning(rows: np.ndarray) -> None:
    s = np.linalg.svd(rows, compute_uv=False)
    if s[-1] == 0 or s[0] / s[-1] > COND_CAP:
        raise SingularMatrixError("coordinate matrix is singular or ill-conditioned (condition number > 1e10)")


def zero_forcing_precode(cm: CoordinateMatrix | np.ndarray, u: np.ndarray) -> np.ndarray:
    """Transmit vector x solving G x = u for a square coordinate matrix."""
    rows = _as_rows(cm)
    if rows.shape[0] != rows.shape[1]:
        raise ValueError(f"zero forcing needs a square coordinate matrix, got {rows.shape}")
    _check_conditioning(rows)
    return np.linalg.solve(rows, np.asarray(u, dtype=complex))


def effective_noise_gammas(cm: CoordinateMatrix | np.ndarray) -> np.ndarray:
    """Diagonal of (G G^*)^{-1}; for a partial selection G has fewer rows than M."""
    rows = _as_rows(cm)
    _check_conditioning(rows)
    B = rows @ rows.conj().T
    return np.real(np.diag(np.linalg.inv(B)))


def batch_gram_inverse_diag(rows: np.ndarray, cond_cap: float = COND_CAP):
    """Inverse-Gram diagonals for a (C, m, M) stack of coordinate matrices.

    Returns ``(gammas, ok)`` where ``ok`` flags stacks whose condition number
    is within ``cond_cap``; gammas of flagged entries are undefined.
    """
    s = np.linalg.svd(rows, compute_uv=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        ok = (s[:, -1] > 0) & (s[:, 0] / s[:, -1] <= cond_cap)
    B = rows @ np.swapaxes(rows.conj(), 1, 2)
    eye = np.eye(B.shape[1])
    B = np.where(ok[:, None, None], B, eye)
    gam = np.real(np.diagonal(np.linalg.inv(B), axis1=1, axis2=2))
    return gam, ok


def batch_waterfill(gammas: np.ndarray, P, tol: float = 1e-12, max_iter: int = 200) -> np.ndarray:
    """Water-filling for each row of a (C, m) array of gains.

    Solves max sum ln(1 + p_i) s.t. sum gamma_i p_i <= P. The optimum is
    p_i = max(0, mu/gamma_i - 1) where the water level mu satisfies
    sum (mu - gamma_i)^+ = P. mu is bracketed by bisection, then fixed
    exactly from the resulting active set so the constraint binds.
    """
    g = np.atleast_2d(np.asarray(gammas, dtype=float))
    P = np.broadcast_to(np.asarray(P, dtype=float), g.shape[:1])
    if np.any(g <= 0):
        raise ValueError("effective noise gains must be positive")
    if np.any(P <= 0):
        raise ValueError("total power must be positive")
    # at mu = min(gamma) + P the cheapest stream alone uses all the power
    lo = g.min(axis=1)
    hi = lo + P
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        used = np.sum(np.maximum(mid[:, None] - g, 0.0), axis=1)
        over = used > P
        hi = np.where(over, mid, hi)
        lo = np.where(over, lo, mid)
        if np.all(hi - lo <= tol * np.maximum(1.0, hi)):
            break
    mu = 0.5 * (lo + hi)
    active = g < mu[:, None]
    # an empty active set only happens from rounding at the bracket edge
    active[np.arange(g.shape[0]), np.argmin(g, axis=1)] = True
    mu = (P + np.sum(np.where(active, g, 0.0), axis=1)) / active.sum(axis=1)
    return np.where(active, mu[:, None] / g - 1.0, 0.0).clip(min=0.0)


def waterfill_powers(gammas, P: float) -> np.ndarray:
    """Rate-maximizing powers under sum_m gamma_m P_m <= P."""
    g = np.asarray(gammas, dtype=float)
    return batch_waterfill(g[None, :], P)[0]


def allocate_power(gammas, P: float, allocation: str = "waterfilled") -> PowerAllocation:
    g = np.asarray(gammas, dtype=float)
    if allocation == "waterfilled":
        p = waterfill_powers(g, P)
    elif allocation == "uniform":
        p = np.full(g.shape, P / np.sum(g))
    else:
        raise ValueError(f"unknown allocation {allocation!r}")
    return PowerAllocation(g, p, float(P))


def batch_sum_rate(gammas: np.ndarray, P, allocation: str = "waterfilled") -> np.ndarray:
    g = np.atleast_2d(np.asarray(gammas, dtype=float))
    if allocation == "waterfilled":
        return np.sum(np.log1p(batch_waterfill(g, P)), axis=1)
    if allocation == "uniform":
        return g.shape[1] * np.log1p(np.asarray(P, dtype=float) / np.sum(g, axis=1))
    raise ValueError(f"unknown allocation {allocation!r}")


def sum_rate(gammas, P: float, allocation: str = "waterfilled") -> float:
    """Sum rate in nats over parallel zero-forcing streams.

    ``uniform`` gives every stream the power P / sum(gammas), i.e.
    m * ln(1 + P / Tr (G G^*)^{-1}) for m streams.
    """
    g = np.asarray(gammas, dtype=float)
    if g.size == 0:
        return 0.0
    return float(batch_sum_rate(g[None, :], P, allocation)[0])
