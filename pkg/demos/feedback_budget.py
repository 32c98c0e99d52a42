"""
How much channel information has to be fed back?
=================================================

Algorithm 1 asks every pre-selected mode for its full direction (2M real
numbers each). The interactive variant first asks for a single overlap per
round and only requests directions from modes that stay below the pruning
level beta. The per-user load of both falls with N, since fewer modes pass
the threshold.
"""

from mimo_bc import greedy_select, interactive_select, modes_from_channels, preselect, rng_stream, sample_channels
from mimo_bc.experiments import ExperimentConfig, run_feedback_vs_users
from mimo_bc.selection import ThresholdMode, ThresholdPreset

cfg = ExperimentConfig(M=2, K=1, N_grid=(100, 200, 500), trials=200,
                       threshold=ThresholdPreset(ThresholdMode.THEOREM2_SUFFICIENT), master_seed=5)
table = run_feedback_vs_users(cfg)
for N, alg, mean, se, t, beta in table.rows:
    print(f"N = {N:3d} {alg}: {mean:.4f} +- {se:.4f} real values per user (t = {t:.2f}, beta = {beta:.3f})")
print("algorithm 1 ledger equals 2M|S0| on every trial:", table.notes["algorithm1_exact"])

###############################################################################
# Lowering beta prunes harder, so the interactive search never asks for more

H = sample_channels(200, 1, 2, rng_stream(9))
pool = modes_from_channels(H)
t = 3.0
print("greedy:", greedy_select(preselect(pool, t), 2).ledger.real_values_fed_back)
for beta in (1.0, 0.6, 0.3, 0.1):
    sel = interactive_select(pool, t, beta)
    print(f"beta = {beta:.1f}: {sel.ledger.real_values_fed_back:4d} values, survivors {sel.ledger.per_round_survivors}, picked {len(sel)}")
