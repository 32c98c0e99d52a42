"""
Where does the best pre-selection threshold sit?
=================================================

For M = 2, K = 1 and a few user counts, sweep the threshold and report the
maximizer next to the interval [ln N - lnln N, ln N]. Small trial counts keep
this quick; raise ``trials`` for smoother curves.
"""

from mimo_bc.experiments import ExperimentConfig, run_threshold_sweep

cfg = ExperimentConfig(M=2, K=1, N_grid=(50, 100, 200), trials=200, master_seed=3)
summary, curve = run_threshold_sweep(cfg)

for N, t_star, rate, se, lo, hi in summary.rows:
    print(f"N = {N:3d}: t* = {t_star:.2f}  ({rate:.3f} +- {se:.3f} nats),  ln N - lnln N = {lo:.2f}, ln N = {hi:.2f}")

###############################################################################
# The full curve for the largest N

N = cfg.N_grid[-1]
rows = curve.where(N=N)
lo, hi = min(r[2] for r in rows), max(r[2] for r in rows)
for _, t, rate, se in rows:
    print(f"  t = {t:5.2f}  {rate:.3f} nats " + "#" * (1 + int(50 * (rate - lo) / (hi - lo))))
