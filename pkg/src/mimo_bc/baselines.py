"""
Reference rates: DPC sum capacity, TDMA, random user selection with DPC and
the no-CSI rate.

The DPC sum capacity is the concave program

    max  ln det(I_M + sum_n H_n^* Q_n H_n)   s.t.  Q_n >= 0, sum_n Tr Q_n <= P

over per-user K x K covariances. It is solved by sum-power iterative
water-filling: every user's covariance is re-water-filled against the
identity plus the interference of all others, sharing one water level across
users, and the result is averaged with the previous iterate. Along that
segment the objective is ln det(A + w (B - A)), a concave function of the
averaging weight w whose maximizer on [0, 1] follows from the generalized
eigenvalues of (B - A, A); using it makes every sweep at least as good as
any fixed weight, so the objective sequence is monotone.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .precoding import batch_waterfill

__all__ = [
    "ConvergenceWarning",
    "DualMacState",
    "single_user_capacity",
    "dpc_sum_capacity",
    "solve_dpc",
    "tdma_rate",
    "random_dpc_rate",
    "no_csi_rate",
]


class ConvergenceWarning(RuntimeWarning):
    """Sum-power water-filling hit its sweep limit before the stopping rule."""


@dataclass
class DualMacState:
    covariances: np.ndarray
    total_power: float
    objective: float
    sweeps: int = 0
    gap: float = np.inf
    converged: bool = False
    history: list[float] = field(default_factory=list)


def _stack(channels) -> np.ndarray:
    if isinstance(channels, np.ndarray):
        H = channels
    else:
        H = np.array([getattr(c, "entries", c) for c in channels], dtype=complex)
    H = np.asarray(H, dtype=complex)
    if H.ndim == 2:
        H = H[None]
    if H.shape[0] == 0:
        raise ValueError("at least one channel is required")
    return H


def single_user_capacity(H: np.ndarray, P: float) -> float:
    """max ln det(I + H Q H^*) over Tr Q <= P, by water-filling the
    eigenvalues of H^* H."""
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    lam = np.linalg.eigvalsh(H @ H.conj().T)
    lam = lam[lam > 1e-14 * max(lam.max(), 1e-300)]
    if lam.size == 0:
        return 0.0
    p = batch_waterfill((1.0 / lam)[None, :], P)[0]
    return float(np.sum(np.log1p(p)))


def _logdet(A: np.ndarray) -> float:
    sign, val = np.linalg.slogdet(A)
    return float(val)


def _aggregate(H: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Per-user terms H_n^* Q_n H_n, shape (N, M, M)."""
    return np.swapaxes(H.conj(), 1, 2) @ Q @ H


def _waterfill_update(H: np.ndarray, Q: np.ndarray, P: float) -> np.ndarray:
    terms = _aggregate(H, Q)
    Z = np.eye(H.shape[2]) + terms.sum(axis=0)
    Zn = Z[None] - terms
    # effective channel gram H_n Z_n^{-1} H_n^*
    A = H @ np.linalg.solve(Zn, np.swapaxes(H.conj(), 1, 2))
    A = 0.5 * (A + np.swapaxes(A.conj(), 1, 2))
    sig, W = np.linalg.eigh(A)
    flat = sig.reshape(-1)
    pos = flat > 1e-14 * max(flat.max(), 1e-300)
    p = np.zeros_like(flat)
    if np.any(pos):
        # water-filling returns per-stream SNRs; the power is SNR / gain
        p[pos] = batch_waterfill((1.0 / flat[pos])[None, :], P)[0] / flat[pos]
    p = p.reshape(sig.shape)
    return (W * p[:, None, :]) @ np.swapaxes(W.conj(), 1, 2)


def _objective_and_gap(H: np.ndarray, Q: np.ndarray, P: float):
    Z = np.eye(H.shape[2]) + _aggregate(H, Q).sum(axis=0)
    f = _logdet(Z)
    # linearization bound: f* <= f + P max_n lam_max(grad_n) - sum_n Tr(Q_n grad_n)
    grad = H @ np.linalg.solve(Z, np.swapaxes(H.conj(), 1, 2))
    grad = 0.5 * (grad + np.swapaxes(grad.conj(), 1, 2))
    top = np.linalg.eigvalsh(grad)[:, -1].max()
    used = np.real(np.einsum("nij,nji->", Q, grad))
    return f, max(P * top - used, 0.0)


def _best_weight(A: np.ndarray, B: np.ndarray) -> float:
    """argmax over w in [0, 1] of ln det(A + w (B - A)) for A > 0."""
    mu = linalg.eigh(B - A, A, eigvals_only=True)

    def slope(w):
        return float(np.sum(mu / (1.0 + w * mu)))

    if slope(1.0) >= 0.0:
        return 1.0
    if slope(0.0) <= 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if slope(mid) > 0.0 else (lo, mid)
    return 0.5 * (lo + hi)


def _spiwf(H: np.ndarray, Q: np.ndarray, P: float, tol: float, max_sweeps: int, history: list):
    """Sum-power iterative water-filling from ``Q``; returns (Q, f, gap, sweeps, converged)."""
    f, gap = _objective_and_gap(H, Q, P)
    eye = np.eye(H.shape[2])
    converged, sweeps = gap <= tol, 0
    while not converged and sweeps < max_sweeps:
        sweeps += 1
        target = _waterfill_update(H, Q, P)
        A = eye + _aggregate(H, Q).sum(axis=0)
        B = eye + _aggregate(H, target).sum(axis=0)
        w = _best_weight(0.5 * (A + A.conj().T), 0.5 * (B + B.conj().T))
        cand = (1.0 - w) * Q + w * target
        f_new, gap_new = _objective_and_gap(H, cand, P)
        if f_new < f:
            # rounding only: w = 0 keeps the objective
            f_new, gap_new, cand = f, gap, Q
        gain = f_new - f
        Q, f, gap = cand, f_new, gap_new
        history.append(f)
        converged = gap <= tol or gain < tol
    return Q, f, gap, sweeps, converged


def _top_gains(H: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Largest eigenvalue of H_n Z^{-1} H_n^* for every user."""
    G = H @ np.linalg.solve(Z, np.swapaxes(H.conj(), 1, 2))
    return np.linalg.eigvalsh(0.5 * (G + np.swapaxes(G.conj(), 1, 2)))[:, -1]


def solve_dpc(channels, P: float, tol: float = 1e-8, max_sweeps: int = 500, screen: bool = True) -> DualMacState:
    """Run sum-power iterative water-filling and return the final state.

    Stops when a sweep improves the objective by less than ``tol`` nats or
    when the linearization bound certifies the iterate is within ``tol`` of
    the optimum. The returned objective is always achievable, hence a lower
    bound on the sum capacity.

    With ``screen`` (and more than 4M users) the iteration runs on the 4M
    strongest users first. Users left out keep zero covariance; any of them
    whose best direction H_n Z^{-1} H_n^* exceeds the common water level of
    the active users would raise the objective, so those are added and the
    iteration resumes. When none remain, the KKT conditions of the full
    problem hold with the same accuracy as on the active set.
    """
    H = _stack(channels)
    if P <= 0:
        raise ValueError("total power must be positive")
    N, K, M = H.shape
    cap = 4 * M
    if screen and N > cap:
        strength = np.sum(np.abs(H) ** 2, axis=(1, 2))
        active = np.sort(np.argsort(-strength, kind="stable")[:cap])
    else:
        active = np.arange(N)
    Q = np.zeros((N, K, K), dtype=complex)
    Q[active] = np.eye(K) * (P / (active.size * K))
    history: list[float] = []
    history.append(_objective_and_gap(H[active], Q[active], P)[0])
    total, converged = 0, False
    while True:
        Qa, f, _, sweeps, converged = _spiwf(H[active], Q[active], P, tol, max_sweeps - total, history)
        Q[active] = Qa
        total += sweeps
        if active.size == N or not converged:
            break
        Z = np.eye(M) + _aggregate(H[active], Qa).sum(axis=0)
        top = _top_gains(H, Z)
        level = top[active].max()
        out = np.setdiff1d(np.arange(N), active)
        extra = out[top[out] > level * (1.0 + 1e-9)]
        if extra.size == 0:
            break
        active = np.union1d(active, extra)
    f, gap = _objective_and_gap(H, Q, P)
    state = DualMacState(Q, float(P), f, total, gap, converged, history)
    if not converged:
        warnings.warn(
            f"sum-power water-filling stopped after {max_sweeps} sweeps (bound gap {state.gap:.3g} nats)",
            ConvergenceWarning,
            stacklevel=2,
        )
    return state


def dpc_sum_capacity(channels, P: float, tol: float = 1e-8, max_sweeps: int = 500) -> float:
    """DPC sum capacity (nats) of the broadcast channel with the given users."""
    return solve_dpc(channels, P, tol, max_sweeps).objective


def tdma_rate(channels, P: float) -> float:
    """Best single-user MIMO capacity among the users."""
    H = _stack(channels)
    if P <= 0:
        raise ValueError("total power must be positive")
    G = H @ np.swapaxes(H.conj(), 1, 2) if H.shape[1] <= H.shape[2] else np.swapaxes(H.conj(), 1, 2) @ H
    lam = np.linalg.eigvalsh(G)
    live = lam > 1e-14 * max(float(lam.max()), 1e-300)
    if not np.any(live):
        return 0.0
    # dead eigenvalues get a cost so large they never receive power
    gam = np.where(live, 1.0 / np.where(live, lam, 1.0), 1e300)
    p = batch_waterfill(gam, P)
    return float(np.max(np.sum(np.log1p(np.where(live, p, 0.0)), axis=1)))


def random_dpc_rate(channels, M_users: int, P: float, stream: np.random.Generator, tol: float = 1e-8) -> float:
    """DPC sum capacity over ``M_users`` users drawn uniformly without replacement."""
    H = _stack(channels)
    if H.shape[0] < M_users:
        raise ValueError(f"need at least {M_users} users, got {H.shape[0]}")
    idx = np.sort(stream.choice(H.shape[0], size=M_users, replace=False))
    return dpc_sum_capacity(H[idx], P, tol)


def no_csi_rate(channel, P: float) -> float:
    """ln det(I + (P/M) H H^*) for one realization."""
    H = np.atleast_2d(np.asarray(getattr(channel, "entries", channel), dtype=complex))
    if P <= 0:
        raise ValueError("total power must be positive")
    M = H.shape[1]
    return _logdet(np.eye(H.shape[0]) + (P / M) * (H @ H.conj().T))
