from math import exp, lgamma, log

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from mimo_bc.channel import EigenMode, rng_stream, sample_channels, svd_modes
from mimo_bc.distributions import lambda_max_tail
from mimo_bc.experiments import omega_incidence
from mimo_bc.selection import (
    BudgetExceededError,
    CandidateSet,
    ThresholdMode,
    ThresholdPreset,
    beta_preset,
    exhaustive_select,
    greedy_select,
    interactive_select,
    modes_from_channels,
    preselect,
    random_select,
    threshold_preset,
)
from mimo_bc.experiments import zf_rate


def pool(N, K, M, seed):
    return modes_from_channels(sample_channels(N, K, M, rng_stream(seed)))


def three_candidates():
    s = 1 / np.sqrt(2)
    return CandidateSet.from_modes(
        [
            EigenMode(0, 1, 10.0, np.array([1, 0], dtype=complex), np.ones(1)),
            EigenMode(1, 1, 9.0, np.array([0, 1], dtype=complex), np.ones(1)),
            EigenMode(2, 1, 8.0, np.array([s, s], dtype=complex), np.ones(1)),
        ]
    )


def test_preselect_bounds():
    p = pool(30, 2, 3, 1)
    assert len(preselect(p, -1.0)) == 60
    assert len(preselect(p, 1e12)) == 0
    t = float(np.median(p.eigenvalues))
    c = preselect(p, t)
    assert np.all(c.eigenvalues > t) and c.threshold == t
    # strict inequality
    assert len(preselect(p, float(p.eigenvalues.max()))) == 0


def test_preselect_from_mode_list():
    modes = svd_modes(np.array([[3.0, 4.0]]), user_id=5) + svd_modes(np.array([[1.0, 0.0]]), user_id=2)
    c = preselect(modes, 2.0)
    assert c.coordinates == [(5, 1)]


def test_preselect_size_matches_leading_tail():
    N, t = 10_000, log(10_000)
    sizes = [len(preselect(pool(N, 1, 2, i + 1000), t)) for i in range(100)]
    p = lambda_max_tail(t, 2, 1)
    assert np.mean(sizes) / N == pytest.approx(p, rel=0.20)


def test_greedy_hand_trace():
    sel = greedy_select(three_candidates(), 2)
    assert sel.coordinates == [(0, 1), (1, 1)]
    assert sel.gamma_scores == [0.0, 0.0]
    assert sel.shortfall == 0
    assert sel.ledger.real_values_fed_back == 2 * 2 * 3
    assert sel.ledger.per_round_survivors == [3, 2]


def test_greedy_degenerate_inputs():
    one = three_candidates().subset(np.array([0]))
    sel = greedy_select(one, 2)
    assert len(sel) == 1 and sel.shortfall == 1
    empty = preselect(three_candidates(), 100.0)
    sel = greedy_select(empty, 2)
    assert len(sel) == 0 and sel.shortfall == 2 and sel.ledger.real_values_fed_back == 0
    v = np.array([1, 0], dtype=complex)
    same = CandidateSet.from_modes([EigenMode(u, 1, 5.0 - u, v, np.ones(1)) for u in range(3)])
    sel = greedy_select(same, 2)
    assert sel.gamma_scores[1] == pytest.approx(1.0)


def test_greedy_ties_are_lexicographic():
    I = np.eye(3, dtype=complex)
    c = CandidateSet.from_modes([EigenMode(u, 1, 4.0, I[u % 3], np.ones(1)) for u in (4, 2, 0, 1)])
    sel = greedy_select(c, 3)
    assert sel.coordinates == [(0, 1), (1, 1), (2, 1)]


@given(st.integers(0, 10_000), st.integers(2, 4), st.integers(1, 2))
def test_greedy_invariants(seed, M, K):
    c = preselect(pool(12, K, M, seed), 0.5)
    sel = greedy_select(c, M)
    assert len(set(sel.coordinates)) == len(sel)
    assert len(sel) + sel.shortfall == M
    if len(sel) == 0:
        return
    assert sel.eigenvalues[0] == c.eigenvalues.max()
    assert sel.ledger.real_values_fed_back == 2 * M * len(c)
    assert all(np.diff(sel.ledger.per_round_survivors) <= 0)
    # each later pick minimizes the accumulated overlap among the remaining candidates
    V = c.right
    for m in range(1, len(sel)):
        chosen = sel.indices[:m]
        gamma = sum(np.abs(V.conj() @ V[j]) ** 2 for j in chosen)
        rest = [i for i in range(len(c)) if i not in chosen]
        assert sel.gamma_scores[m] == pytest.approx(gamma[sel.indices[m]])
        assert gamma[sel.indices[m]] <= min(gamma[rest]) + 1e-12
        assert sel.gamma_scores[m] >= 0


@given(st.integers(0, 10_000), st.floats(0.01, 100.0))
def test_greedy_scale_invariance(seed, scale):
    c = pool(15, 2, 3, seed)
    scaled = CandidateSet(c.user_ids, c.mode_indices, scale * c.eigenvalues, c.right)
    assert greedy_select(c, 3).coordinates == greedy_select(scaled, 3).coordinates


def test_greedy_is_deterministic():
    c = preselect(pool(50, 2, 3, 7), 1.0)
    a, b = greedy_select(c, 3), greedy_select(c, 3)
    assert a.coordinates == b.coordinates and a.gamma_scores == b.gamma_scores


def test_interactive_without_pruning_matches_greedy():
    for i in range(200):
        p = pool(20, 2, 3, (i + 500))
        a = greedy_select(preselect(p, 1.0), 3)
        b = interactive_select(p, 1.0, 1.0)
        assert a.coordinates == b.coordinates


def test_interactive_total_pruning():
    p = pool(40, 1, 3, 31)
    sel = interactive_select(p, 0.5, 0.0)
    assert len(sel) == 1 and sel.shortfall == 2
    assert sel.ledger.per_round_survivors[-1] == 0


def test_interactive_ledger_formula():
    for seed in range(50):
        p = pool(30, 2, 2, seed + 100)
        sel = interactive_select(p, 1.0, 1.0, 2)
        surv = sel.ledger.per_round_survivors
        if sel.shortfall == 0:
            assert sel.ledger.real_values_fed_back == sum(surv[:2]) + 2 * 2**2
        else:
            assert sel.ledger.real_values_fed_back == sum(surv) + 2 * 2 * len(sel)


def test_interactive_rejects_bad_beta():
    with pytest.raises(ValueError):
        interactive_select(pool(5, 1, 2, 1), 0.0, 1.5)


@given(st.integers(0, 100_000), st.integers(2, 4), st.floats(0, 1), st.floats(0, 1))
def test_lower_beta_never_increases_feedback(seed, M, b1, b2):
    lo, hi = sorted((b1, b2))
    p = pool(25, 2, M, seed)
    t = 0.8
    assert interactive_select(p, t, lo).ledger.real_values_fed_back <= interactive_select(p, t, hi).ledger.real_values_fed_back


def test_exhaustive_hand_instance_matches_greedy():
    c = three_candidates()
    ex = exhaustive_select(c, 2)
    assert ex.coordinates == greedy_select(c, 2).coordinates


def test_exhaustive_tie_break():
    I = np.eye(2, dtype=complex)
    c = CandidateSet.from_modes([EigenMode(u, 1, 3.0, I[u % 2], np.ones(1)) for u in range(4)])
    assert exhaustive_select(c, 2).coordinates == [(0, 1), (1, 1)]
    assert exhaustive_select(c, 2, "min_defect").coordinates == [(0, 1), (1, 1)]


@given(st.integers(0, 10_000))
def test_exhaustive_dominates_greedy(seed):
    c = preselect(pool(10, 2, 2, seed), 0.5)
    g, e = greedy_select(c, 2), exhaustive_select(c, 2, P=10.0)
    rg, re = zf_rate(g, 10.0), zf_rate(e, 10.0)
    if np.isfinite(rg):
        assert re >= rg - 1e-12
    u = exhaustive_select(c, 2, "uniform_rate", P=10.0)
    ru = zf_rate(u, 10.0, "uniform")
    if np.isfinite(zf_rate(g, 10.0, "uniform")):
        assert ru >= zf_rate(g, 10.0, "uniform") - 1e-12


def test_exhaustive_min_defect_prefers_orthogonal():
    c = three_candidates()
    sel = exhaustive_select(c, 2, "min_defect")
    assert sel.coordinates == [(0, 1), (1, 1)]


def test_exhaustive_budget():
    c = pool(40, 1, 3, 9)
    with pytest.raises(BudgetExceededError, match="threshold"):
        exhaustive_select(c, 3, budget=1000)
    with pytest.raises(ValueError):
        exhaustive_select(c, 3, criterion="nope")


def test_random_select_all_users_when_N_equals_M():
    p = pool(3, 2, 3, 4)
    sel = random_select(p, 3, rng_stream(1))
    assert sorted(u for u, _ in sel.coordinates) == [0, 1, 2]
    # each user contributes its strongest mode
    assert all(m == 1 for _, m in sel.coordinates)


def test_random_select_uniform_over_users():
    p = pool(10, 1, 2, 5)
    counts = np.zeros(10)
    s = rng_stream(6)
    for _ in range(10_000):
        for u, _ in random_select(p, 2, s).coordinates:
            counts[u] += 1
    assert stats.chisquare(counts).pvalue > 0.01


def test_random_select_pool_variant():
    p = pool(20, 1, 2, 7)
    sel = random_select(p, 2, rng_stream(8), pool_threshold=1e9)
    assert len(sel) == 0 and sel.shortfall == 2
    sel = random_select(p, 2, rng_stream(8), pool_threshold=0.5)
    assert all(lam > 0.5 for lam in sel.eigenvalues)
    with pytest.raises(ValueError):
        random_select(pool(1, 1, 2, 1), 2, rng_stream(1))


def test_threshold_presets():
    assert threshold_preset(100, 2, 1, ThresholdPreset(ThresholdMode.FIXED, 2.0)) == 2.0
    N, M, K = 1000, 2, 2
    l1 = np.log(N)
    l2, l3 = np.log(l1), np.log(np.log(l1))
    l4 = np.log(l3)
    t2 = threshold_preset(N, M, K, ThresholdPreset(ThresholdMode.THEOREM2_SUFFICIENT, 2.0))
    assert t2 == pytest.approx(l1 + (M + K - 2) * l2 - l4 - 2.0)
    t1 = threshold_preset(N, M, K, ThresholdPreset(ThresholdMode.THEOREM1_NECESSARY, 1.0))
    assert t1 == pytest.approx(l1 + (M + K - 2) * l2 - (l4 + lgamma(K) + lgamma(M) + 1.0))
    fig = threshold_preset(N, M, K, ThresholdPreset())
    assert l1 - l2 <= fig <= l1
    with pytest.raises(ValueError):
        threshold_preset(15, 2, 1, ThresholdPreset(ThresholdMode.THEOREM2_SUFFICIENT))
    assert ThresholdPreset("theorem2_sufficient").value_at(N, M, K) == pytest.approx(t2)


def test_remark1_value_independent_evaluation():
    N, M, K, psi = 10**6, 2, 1, 1.0
    t = threshold_preset(N, M, K, ThresholdPreset(ThresholdMode.REMARK1_REFINED, psi))
    # iterate logarithms through numpy instead of the math module
    x = np.log(np.float64(N))
    ref = x + (K - 2) * np.log(x) + M * np.log(np.log(x)) - np.log(np.log(np.log(x))) - psi
    assert t == pytest.approx(ref, rel=1e-13)
    assert t == pytest.approx(13.81551 - 2.62579 + 2 * 0.96534 - np.log(0.96534) - 1, abs=1e-4)


def test_beta_preset():
    assert beta_preset(2.0, 2) == pytest.approx(exp(-1))


@pytest.mark.slow
def test_two_modes_from_one_user_becomes_rarer():
    # pooled two-proportion z test, K = 2, N = 100 versus N = 10^4
    (p1, _, n1), (p2, _, n2) = omega_incidence(100, 2, 2, 400_000, 41), omega_incidence(10_000, 2, 2, 60_000, 41)
    pbar = (p1 * n1 + p2 * n2) / (n1 + n2)
    z = (p1 - p2) / np.sqrt(pbar * (1 - pbar) * (1 / n1 + 1 / n2))
    assert z > 1.96, (p1, p2, z)
