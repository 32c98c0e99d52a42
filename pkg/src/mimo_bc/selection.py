"""
Coordinate selection: threshold pre-selection, the greedy orthogonality
search, its interactive (two-threshold) variant with reduced feedback, an
exhaustive reference search and random selection.

Candidate pools are held as :class:`CandidateSet`, a struct of arrays sorted
by ``(user_id, mode_index)``. All arg-max / arg-min operations take the first
occurrence, so ties always resolve to the lexicographically smallest
coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from math import comb, exp, lgamma, log
from typing import Iterable, Sequence

import numpy as np

from .channel import EigenMode, batch_modes
from .precoding import batch_gram_inverse_diag, batch_sum_rate

__all__ = [
    "CandidateSet",
    "FeedbackLedger",
    "SelectionResult",
    "ThresholdMode",
    "ThresholdPreset",
    "BudgetExceededError",
    "modes_from_channels",
    "preselect",
    "greedy_select",
    "interactive_select",
    "exhaustive_select",
    "random_select",
    "threshold_preset",
    "beta_preset",
]


class BudgetExceededError(RuntimeError):
    """Exhaustive search space larger than the configured subset budget."""


@dataclass(frozen=True)
class CandidateSet:
    """Eigenmodes available to the scheduler.

    ``threshold`` is the pre-selection level the entries passed (``-inf`` for
    an unfiltered pool); every entry has ``eigenvalue > threshold``.
    """

    user_ids: np.ndarray
    mode_indices: np.ndarray
    eigenvalues: np.ndarray
    right: np.ndarray
    threshold: float = -np.inf

    def __len__(self) -> int:
        return int(self.eigenvalues.shape[0])

    @property
    def M(self) -> int:
        return int(self.right.shape[1])

    @property
    def coordinates(self) -> list[tuple[int, int]]:
        return list(zip(self.user_ids.tolist(), self.mode_indices.tolist()))

    def subset(self, mask_or_index) -> "CandidateSet":
        return CandidateSet(
            self.user_ids[mask_or_index],
            self.mode_indices[mask_or_index],
            self.eigenvalues[mask_or_index],
            self.right[mask_or_index],
            self.threshold,
        )

    @classmethod
    def from_modes(cls, modes: Iterable[EigenMode], threshold: float = -np.inf) -> "CandidateSet":
        modes = sorted(modes, key=lambda e: (e.user_id, e.mode_index))
        if not modes:
            raise ValueError("cannot infer the antenna count from an empty mode list")
        return cls(
            np.array([e.user_id for e in modes], dtype=int),
            np.array([e.mode_index for e in modes], dtype=int),
            np.array([e.eigenvalue for e in modes], dtype=float),
            np.array([e.right_vector for e in modes], dtype=complex),
            threshold,
        )


def modes_from_channels(H: np.ndarray) -> CandidateSet:
    """Decompose an (N, K, M) channel stack into the full pool of N*min(K,M) modes."""
    lam, right, _ = batch_modes(H)
    N, r = lam.shape
    return CandidateSet(
        np.repeat(np.arange(N), r),
        np.tile(np.arange(1, r + 1), N),
        lam.reshape(-1),
        right.reshape(N * r, -1),
    )


@dataclass
class FeedbackLedger:
    """Count of real scalars sent from the users to the base station.

    ``per_round_survivors[m]`` is |S_m|, the candidate pool size entering
    round m (m = 0 is the pre-selected set).
    """

    real_values_fed_back: int = 0
    rounds: int = 0
    per_round_survivors: list[int] = field(default_factory=list)


@dataclass
class SelectionResult:
    """Chosen coordinates in pick order.

    ``gamma_scores[m]`` is the accumulated orthogonality measure of the m-th
    pick against the earlier picks at the time it was chosen (0 for the first
    pick). ``candidates`` and ``indices`` allow re-checking each step.
    """

    coordinates: list[tuple[int, int]]
    gamma_scores: list[float]
    shortfall: int
    ledger: FeedbackLedger
    eigenvalues: np.ndarray
    right: np.ndarray
    candidates: CandidateSet | None = None
    indices: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.coordinates)


def _empty_result(M: int, dim: int, candidates: CandidateSet | None = None) -> SelectionResult:
    return SelectionResult(
        [], [], M, FeedbackLedger(0, 0, [0]), np.zeros(0), np.zeros((0, dim), dtype=complex), candidates, []
    )


def _result(cands: CandidateSet, picks: list[int], scores: list[float], M: int, ledger: FeedbackLedger):
    idx = np.asarray(picks, dtype=int)
    return SelectionResult(
        [(int(cands.user_ids[i]), int(cands.mode_indices[i])) for i in picks],
        [float(s) for s in scores],
        M - len(picks),
        ledger,
        cands.eigenvalues[idx],
        cands.right[idx],
        cands,
        list(picks),
    )


def preselect(modes: CandidateSet | Sequence[EigenMode], t: float) -> CandidateSet:
    """Keep the modes whose eigenvalue strictly exceeds ``t``."""
    if not isinstance(modes, CandidateSet):
        modes = CandidateSet.from_modes(modes)
    if np.isnan(t):
        raise ValueError("threshold must not be NaN")
    out = modes.subset(modes.eigenvalues > t)
    return CandidateSet(out.user_ids, out.mode_indices, out.eigenvalues, out.right, float(t))


def _overlaps(right: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.minimum(np.abs(right.conj() @ v) ** 2, 1.0)


def greedy_select(candidates: CandidateSet, M: int) -> SelectionResult:
    """Pick up to M nearly orthogonal coordinates.

    The first pick is the largest eigenvalue; each later pick minimizes the
    running sum of squared overlaps with all previous picks. Feedback is
    counted as 2M reals per pre-selected mode (eigenvector plus eigenvalue).
    """
    n = len(candidates)
    if n == 0:
        return _empty_result(M, candidates.M, candidates)
    V = candidates.right
    alive = np.ones(n, dtype=bool)
    gamma = np.zeros(n)
    first = int(np.argmax(candidates.eigenvalues))
    picks, scores, survivors = [first], [0.0], [n]
    alive[first] = False
    while len(picks) < min(M, n):
        gamma += _overlaps(V, V[picks[-1]])
        survivors.append(int(alive.sum()))
        nxt = int(np.argmin(np.where(alive, gamma, np.inf)))
        picks.append(nxt)
        scores.append(gamma[nxt])
        alive[nxt] = False
    ledger = FeedbackLedger(2 * candidates.M * n, len(picks), survivors)
    return _result(candidates, picks, scores, M, ledger)


def interactive_select(modes: CandidateSet, t: float, beta: float, M: int | None = None) -> SelectionResult:
    """Greedy selection with per-round pruning of candidates whose overlap
    with the latest pick is not below ``beta``.

    Feedback: one real per pre-selected eigenvalue, one accumulated score per
    surviving candidate per round, and 2M reals for every eigenvector the base
    station requests. ``beta >= 1`` disables pruning. If a round leaves no
    survivor the selection stops early and the remaining slots are recorded
    as shortfall.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    cands = preselect(modes, t)
    M = cands.M if M is None else M
    n = len(cands)
    if n == 0:
        return _empty_result(M, cands.M, cands)
    V = cands.right
    alive = np.ones(n, dtype=bool)
    gamma = np.zeros(n)
    first = int(np.argmax(cands.eigenvalues))
    picks, scores, survivors = [first], [0.0], [n]
    alive[first] = False
    fed_back = n
    while len(picks) < M:
        z = _overlaps(V, V[picks[-1]])
        if beta < 1.0:
            alive &= z < beta
        gamma += z
        size = int(alive.sum())
        survivors.append(size)
        fed_back += size
        if size == 0:
            break
        nxt = int(np.argmin(np.where(alive, gamma, np.inf)))
        picks.append(nxt)
        scores.append(gamma[nxt])
        alive[nxt] = False
    fed_back += 2 * cands.M * len(picks)
    ledger = FeedbackLedger(fed_back, len(picks), survivors)
    return _result(cands, picks, scores, M, ledger)


CRITERIA = ("waterfilled_rate", "uniform_rate", "min_defect")
_TIE_RTOL = 1e-12


def exhaustive_select(
    candidates: CandidateSet,
    M: int,
    criterion: str = "waterfilled_rate",
    P: float = 10.0,
    budget: int = 2_000_000,
    chunk: int = 50_000,
    cond_cap: float = 1e10,
) -> SelectionResult:
    """Best subset of size min(M, |candidates|) under ``criterion``.

    Rates are maximized and the orthogonality defect is minimized. Subsets
    whose coordinate matrix is singular (condition number above
    ``cond_cap``) are never chosen. Ties keep the lexicographically first
    subset.

    Raises
    ------
    BudgetExceededError
        When the number of subsets exceeds ``budget``; raise the threshold to
        shrink the pool.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}; expected one of {CRITERIA}")
    n = len(candidates)
    if n == 0:
        return _empty_result(M, candidates.M, candidates)
    m = min(M, n)
    total = comb(n, m)
    if total > budget:
        raise BudgetExceededError(
            f"{total} subsets of size {m} from {n} candidates exceed the budget of {budget}; "
            "raise the pre-selection threshold"
        )
    G = np.sqrt(candidates.eigenvalues)[:, None] * candidates.right.conj()
    best_val, best = -np.inf, None
    it = combinations(range(n), m)
    while True:
        block = np.array([c for _, c in zip(range(chunk), it)], dtype=int)
        if block.size == 0:
            break
        rows = G[block]
        gam, ok = batch_gram_inverse_diag(rows, cond_cap)
        if criterion == "min_defect":
            norms = np.sum(np.abs(rows) ** 2, axis=2)
            B = rows @ np.swapaxes(rows.conj(), 1, 2)
            sign, logdet = np.linalg.slogdet(B)
            val = -(np.sum(np.log(norms), axis=1) - logdet)
        else:
            alloc = "waterfilled" if criterion == "waterfilled_rate" else "uniform"
            val = batch_sum_rate(np.where(ok[:, None], gam, 1.0), P, alloc)
        val = np.where(ok, val, -np.inf)
        top = np.max(val)
        if not np.isfinite(top):
            continue
        # first subset within rounding of the block maximum
        j = int(np.argmax(val >= top - _TIE_RTOL * (1.0 + abs(top))))
        if best is None or val[j] > best_val + _TIE_RTOL * (1.0 + abs(best_val)):
            best_val, best = float(val[j]), block[j].tolist()
    if best is None:
        return _empty_result(M, candidates.M, candidates)
    ledger = FeedbackLedger(2 * candidates.M * n, 1, [n])
    return _result(candidates, best, [0.0] * len(best), M, ledger)


def random_select(
    modes: CandidateSet,
    M: int,
    stream: np.random.Generator,
    pool_threshold: float | None = None,
) -> SelectionResult:
    """Random scheduling.

    By default M distinct users are drawn uniformly and each contributes its
    largest-eigenvalue mode. With ``pool_threshold`` set, up to M coordinates
    are instead drawn uniformly among the modes above that threshold, and an
    undersized pool is recorded as shortfall.
    """
    if pool_threshold is not None:
        pool = preselect(modes, pool_threshold)
        k = min(M, len(pool))
        if k == 0:
            return _empty_result(M, modes.M, pool)
        picks = stream.choice(len(pool), size=k, replace=False).tolist()
        ledger = FeedbackLedger(2 * modes.M * len(pool), 1, [len(pool)])
        return _result(pool, picks, [0.0] * k, M, ledger)
    users = np.unique(modes.user_ids)
    if users.size < M:
        raise ValueError(f"random selection needs at least M={M} users, got {users.size}")
    chosen = stream.choice(users, size=M, replace=False)
    picks = []
    for u in chosen:
        idx = np.flatnonzero(modes.user_ids == u)
        picks.append(int(idx[np.argmax(modes.eigenvalues[idx])]))
    ledger = FeedbackLedger(2 * modes.M * M, 1, [len(modes)])
    return _result(modes, picks, [0.0] * M, M, ledger)


class ThresholdMode(str, Enum):
    FIXED = "fixed"
    THEOREM1_NECESSARY = "theorem1_necessary"
    THEOREM2_SUFFICIENT = "theorem2_sufficient"
    REMARK1_REFINED = "remark1_refined"
    FIG1_EMPIRICAL = "fig1_empirical"


_DEFAULT_OFFSET = {
    ThresholdMode.FIXED: 0.0,
    ThresholdMode.THEOREM1_NECESSARY: 1.0,
    ThresholdMode.THEOREM2_SUFFICIENT: 2.0,
    ThresholdMode.REMARK1_REFINED: 1.0,
    ThresholdMode.FIG1_EMPIRICAL: 0.5,
}


@dataclass(frozen=True)
class ThresholdPreset:
    """Pre-selection threshold rule.

    ``rho_offset`` is the free part of each rule:

    * fixed: the threshold itself.
    * theorem1_necessary: t = ln N + (M+K-2) lnln N - rho with
      rho = lnlnlnln N + ln(Gamma(K)Gamma(M)) + rho_offset.
    * theorem2_sufficient: same form with rho = lnlnlnln N + rho_offset,
      i.e. rho_offset is q(N).
    * remark1_refined: t = ln N + (K-2) lnln N + M lnlnln N - lnlnlnln N - rho_offset
      (rho_offset plays psi(N)).
    * fig1_empirical: t = ln N - rho_offset * lnln N, a point inside the
      empirically optimal band [ln N - lnln N, ln N].
    """

    mode: ThresholdMode = ThresholdMode.FIG1_EMPIRICAL
    rho_offset: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", ThresholdMode(self.mode))
        if self.rho_offset is None:
            object.__setattr__(self, "rho_offset", _DEFAULT_OFFSET[self.mode])

    def value_at(self, N: int, M: int, K: int) -> float:
        return threshold_preset(N, M, K, self)


def _iterated_logs(N: int):
    l1 = log(N)
    l2 = log(l1)
    l3 = log(l2)
    return l1, l2, l3, log(l3)


def threshold_preset(N: int, M: int, K: int, preset: ThresholdPreset) -> float:
    """Evaluate a threshold rule with natural logarithms.

    Raises
    ------
    ValueError
        For N < 16 in any N-dependent mode (the fourth iterated log needs
        lnlnln N > 0).
    """
    if preset.mode is ThresholdMode.FIXED:
        return float(preset.rho_offset)
    if N < 16:
        raise ValueError(f"threshold mode {preset.mode.value} needs N >= 16, got N={N}")
    l1, l2, l3, l4 = _iterated_logs(N)
    q = float(preset.rho_offset)
    if preset.mode is ThresholdMode.THEOREM1_NECESSARY:
        rho = l4 + lgamma(K) + lgamma(M) + q
        return l1 + (M + K - 2) * l2 - rho
    if preset.mode is ThresholdMode.THEOREM2_SUFFICIENT:
        return l1 + (M + K - 2) * l2 - (l4 + q)
    if preset.mode is ThresholdMode.REMARK1_REFINED:
        return l1 + (K - 2) * l2 + M * l3 - l4 - q
    return l1 - q * l2


def beta_preset(q: float, M: int) -> float:
    """Pruning level e^{-q/M} paired with the sufficient-condition threshold."""
    return exp(-q / M)
