"""
Monte Carlo harness: sum rate versus users, threshold sweeps, sum rate versus
power, feedback counts and the statistical validation suite.

Every trial is a pure function of ``(master_seed, experiment tag, N, trial)``:
its channels come from :func:`~mimo_bc.channel.rng_stream` with those indices
and any extra randomness (random scheduling) from sub-streams of the same
address. Trials are mapped over a process pool and reduced in trial order, so
results do not depend on the worker count.

All rates are in nats and the noise power is 1, so P in linear scale is the
SNR.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from math import ceil, gamma, log, sqrt

import numpy as np
from scipy import stats

from .baselines import ConvergenceWarning, dpc_sum_capacity, no_csi_rate, tdma_rate
from .channel import batch_modes, random_unit_vectors, rng_stream, sample_channels
from .distributions import lambda_max_tail, overlap_cdf, projection_beta_cdf
from .precoding import SCHEMES, batch_gram_inverse_diag, sum_rate
from .selection import (
    SelectionResult,
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

__all__ = [
    "ExperimentConfig",
    "Table",
    "Statistic",
    "ValidationReport",
    "InsufficientSamplesWarning",
    "db_to_linear",
    "default_t_grid",
    "run_sumrate_vs_users",
    "run_threshold_sweep",
    "run_sumrate_vs_power",
    "run_feedback_vs_users",
    "run_lemma_validation",
    "zf_rate",
    "lambda_max_samples",
    "overlap_ks",
    "projection_ks",
    "lambda_max_tail_mc",
    "eta_estimate",
    "kappa_estimate",
    "omega_incidence",
]

# experiment tags, the second coordinate of every random stream
_TAG_USERS, _TAG_SWEEP, _TAG_POWER, _TAG_FEEDBACK = 1, 2, 3, 4
_TAG_OVERLAP, _TAG_PROJ, _TAG_TAIL, _TAG_ETA, _TAG_KAPPA = 10, 11, 12, 13, 14
_TAG_L, _TAG_OMEGA, _TAG_EPS, _TAG_GRAM, _TAG_L6 = 15, 16, 17, 18, 19

Z95 = 1.959963984540054


class InsufficientSamplesWarning(RuntimeWarning):
    """A conditional Monte Carlo event was hit fewer than 100 times."""


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings shared by all experiments.

    ``beta`` of ``None`` means e^{-q/M} with q the offset of the threshold
    preset (2 when the preset is not theorem2_sufficient).
    """

    M: int = 2
    K: int = 1
    N_grid: tuple = (50, 100, 200)
    P_grid_db: tuple = (10.0,)
    trials: int = 1000
    schemes: tuple = SCHEMES
    threshold: ThresholdPreset = field(default_factory=ThresholdPreset)
    beta: float | None = None
    master_seed: int = 0
    epsilon_orth: float = 0.3
    workers: int = 1
    quick: bool = False

    def __post_init__(self):
        object.__setattr__(self, "N_grid", tuple(int(n) for n in self.N_grid))
        object.__setattr__(self, "P_grid_db", tuple(float(p) for p in self.P_grid_db))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        if self.M < 1 or self.K < 1:
            raise ValueError(f"M and K must be positive, got M={self.M}, K={self.K}")
        if self.trials < 1:
            raise ValueError(f"trials must be at least 1, got {self.trials}")
        if not self.N_grid or min(self.N_grid) < 1:
            raise ValueError(f"N grid must be non-empty with positive entries, got {self.N_grid}")
        if not self.P_grid_db or not np.all(np.isfinite(self.P_grid_db)):
            raise ValueError(f"P grid must be non-empty and finite, got {self.P_grid_db}")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown or not self.schemes:
            raise ValueError(f"unknown or empty scheme list: {sorted(unknown)}")
        if self.beta is not None and not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if not 0.0 < self.epsilon_orth < 1.0:
            raise ValueError(f"epsilon_orth must lie in (0, 1), got {self.epsilon_orth}")
        if self.workers < 1:
            raise ValueError(f"workers must be at least 1, got {self.workers}")

    @property
    def P_grid(self) -> np.ndarray:
        return db_to_linear(self.P_grid_db)

    def threshold_at(self, N: int) -> float:
        return threshold_preset(N, self.M, self.K, self.threshold)

    def beta_value(self) -> float:
        if self.beta is not None:
            return float(self.beta)
        q = self.threshold.rho_offset if self.threshold.mode is ThresholdMode.THEOREM2_SUFFICIENT else 2.0
        return beta_preset(q, self.M)


@dataclass
class Table:
    """Rows of one output file; ``notes`` go to the run manifest, not the CSV."""

    name: str
    columns: tuple
    rows: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        j = self.columns.index(name)
        return [r[j] for r in self.rows]

    def where(self, **match) -> list:
        idx = {k: self.columns.index(k) for k in match}
        return [r for r in self.rows if all(r[idx[k]] == v for k, v in match.items())]


def _pmap(func, tasks, workers: int):
    """Ordered map over a process pool (in-process when workers == 1)."""
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks, chunksize=chunk))


def _mean_se(x) -> tuple[float, float, int]:
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    n = x.size
    if n == 0:
        return np.nan, np.nan, 0
    se = float(np.std(x, ddof=1) / sqrt(n)) if n > 1 else np.nan
    return float(np.mean(x)), se, n


def zf_rate(sel: SelectionResult, P: float, allocation: str = "waterfilled") -> float:
    """Zero-forcing sum rate over the selected coordinates.

    An empty selection transmits nothing and scores 0; a singular coordinate
    matrix returns NaN so the caller can drop and count the trial.
    """
    if len(sel) == 0:
        return 0.0
    rows = np.sqrt(sel.eigenvalues)[:, None] * sel.right.conj()
    gam, ok = batch_gram_inverse_diag(rows[None])
    if not ok[0]:
        return np.nan
    return sum_rate(gam[0], P, allocation)


def _channels(cfg: ExperimentConfig, tag: int, N: int, trial: int, K: int | None = None, M: int | None = None):
    K = cfg.K if K is None else K
    M = cfg.M if M is None else M
    return sample_channels(N, K, M, rng_stream(cfg.master_seed, tag, N, trial))


def _scheme_rates(cfg: ExperimentConfig, tag: int, N: int, trial: int, P_list):
    """Rates of every configured scheme on one shared channel draw.

    Returns ``(rates, shortfall, capped)``: rates of shape (schemes,
    len(P_list)), per-scheme shortfall flags, and the number of DPC solves
    that hit the sweep limit (their value is still an achievable rate). The
    random schemes use sub-streams 1 (random_zf) and 2 (random_dpc) of the
    trial address.
    """
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        rates, short = _scheme_rates_inner(cfg, tag, N, trial, P_list)
    capped = 0
    for w in caught:
        if issubclass(w.category, ConvergenceWarning):
            capped += 1
        else:
            warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    return rates, short, capped


def _scheme_rates_inner(cfg, tag, N, trial, P_list):
    H = _channels(cfg, tag, N, trial)
    P_list = np.atleast_1d(np.asarray(P_list, dtype=float))
    schemes = cfg.schemes
    rates = np.full((len(schemes), P_list.size), np.nan)
    short = np.zeros(len(schemes), dtype=bool)
    pool = modes_from_channels(H)
    t = cfg.threshold_at(N)
    cands = preselect(pool, t)
    greedy = greedy_select(cands, cfg.M) if {"proposed_wf", "proposed_uniform"} & set(schemes) else None
    for s, name in enumerate(schemes):
        if name == "proposed_wf":
            rates[s] = [zf_rate(greedy, P, "waterfilled") for P in P_list]
            short[s] = greedy.shortfall > 0
        elif name == "proposed_uniform":
            rates[s] = [zf_rate(greedy, P, "uniform") for P in P_list]
            short[s] = greedy.shortfall > 0
        elif name == "exhaustive":
            for j, P in enumerate(P_list):
                sel = exhaustive_select(cands, cfg.M, "waterfilled_rate", P=P)
                rates[s, j] = zf_rate(sel, P, "waterfilled")
                short[s] = sel.shortfall > 0
        elif name == "random_zf":
            # random coordinates from the same pre-selected pool as exhaustive
            sel = random_select(pool, cfg.M, rng_stream(cfg.master_seed, tag, N, trial, 1), pool_threshold=t)
            rates[s] = [zf_rate(sel, P, "waterfilled") for P in P_list]
            short[s] = sel.shortfall > 0
        elif name == "tdma":
            rates[s] = [tdma_rate(H, P) for P in P_list]
        elif name == "random_dpc":
            k = min(cfg.M, N)
            idx = np.sort(rng_stream(cfg.master_seed, tag, N, trial, 2).choice(N, size=k, replace=False))
            rates[s] = [dpc_sum_capacity(H[idx], P) for P in P_list]
            short[s] = k < cfg.M
        elif name == "dpc_opt":
            rates[s] = [dpc_sum_capacity(H, P) for P in P_list]
        elif name == "no_csi":
            rates[s] = [no_csi_rate(H[0], P) for P in P_list]
    return rates, short


def _scheme_task(args, cfg, tag, P_list):
    N, trial = args
    return _scheme_rates(cfg, tag, N, trial, P_list)


def run_sumrate_vs_users(cfg: ExperimentConfig) -> Table:
    """Mean sum rate per (N, scheme) at the first grid power.

    Columns: N, scheme, mean_rate_nats, stderr, singular_trials. Trials whose
    coordinate matrix is singular are excluded from the mean and counted;
    shortfall counts (fewer than M coordinates) are kept in ``notes``.
    """
    P = float(cfg.P_grid[0])
    tasks = [(N, i) for N in cfg.N_grid for i in range(cfg.trials)]
    out = _pmap(partial(_scheme_task, cfg=cfg, tag=_TAG_USERS, P_list=[P]), tasks, cfg.workers)
    table = Table("sumrate_vs_users", ("N", "scheme", "mean_rate_nats", "stderr", "singular_trials"))
    shortfalls = {}
    capped = {N: sum(c for *_, c in out[a * cfg.trials : (a + 1) * cfg.trials]) for a, N in enumerate(cfg.N_grid)}
    for a, N in enumerate(cfg.N_grid):
        block = out[a * cfg.trials : (a + 1) * cfg.trials]
        rates = np.stack([r for r, _, _ in block])[:, :, 0]
        short = np.stack([s for _, s, _ in block])
        for s, name in enumerate(cfg.schemes):
            mean, se, n = _mean_se(rates[:, s])
            table.rows.append((N, name, mean, se, cfg.trials - n))
            shortfalls[f"N={N},{name}"] = int(short[:, s].sum())
    table.notes = {"P_db": cfg.P_grid_db[0], "shortfall_trials": shortfalls, "dpc_sweep_limit_hits": capped}
    return table


def default_t_grid(N: int, step: float = 0.25) -> np.ndarray:
    """Grid from ln N - 2 lnln N up to (at least) ln N + 1 in steps of ``step``."""
    lo = log(N) - 2.0 * log(log(N))
    hi = log(N) + 1.0
    n = int(ceil((hi - lo) / step - 1e-9)) + 1
    return lo + step * np.arange(n)


def _sweep_task(args, cfg, t_grids, P):
    N, trial = args
    H = _channels(cfg, _TAG_SWEEP, N, trial)
    pool = modes_from_channels(H)
    return np.array([zf_rate(greedy_select(preselect(pool, t), cfg.M), P, "waterfilled") for t in t_grids[N]])


def run_threshold_sweep(cfg: ExperimentConfig, t_grid=None, step: float = 0.25) -> tuple[Table, Table]:
    """Optimal pre-selection threshold per N for the proposed scheme.

    All grid points of a trial reuse the same channels. ``t_grid`` may be an
    array (used for every N) or a mapping N -> array; by default
    :func:`default_t_grid` is used.

    Returns the summary table (N, t_star, mean_rate_nats, stderr, t_low,
    t_high), where [t_low, t_high] = [ln N - lnln N, ln N], and the full curve
    (N, t, mean_rate_nats, stderr).
    """
    if t_grid is None:
        grids = {N: default_t_grid(N, step) for N in cfg.N_grid}
    elif isinstance(t_grid, dict):
        grids = {N: np.asarray(t_grid[N], dtype=float) for N in cfg.N_grid}
    else:
        grids = {N: np.asarray(t_grid, dtype=float) for N in cfg.N_grid}
    P = float(cfg.P_grid[0])
    tasks = [(N, i) for N in cfg.N_grid for i in range(cfg.trials)]
    out = _pmap(partial(_sweep_task, cfg=cfg, t_grids=grids, P=P), tasks, cfg.workers)
    summary = Table("threshold_sweep", ("N", "t_star", "mean_rate_nats", "stderr", "t_low", "t_high"))
    curve = Table("threshold_curve", ("N", "t", "mean_rate_nats", "stderr"))
    for a, N in enumerate(cfg.N_grid):
        rates = np.stack(out[a * cfg.trials : (a + 1) * cfg.trials])
        stats_ = [_mean_se(rates[:, j]) for j in range(rates.shape[1])]
        means = np.array([m for m, _, _ in stats_])
        for t, (m, se, _) in zip(grids[N], stats_):
            curve.rows.append((N, float(t), m, se))
        j = int(np.nanargmax(means))
        summary.rows.append((N, float(grids[N][j]), means[j], stats_[j][1], log(N) - log(log(N)), log(N)))
    summary.notes = {"P_db": cfg.P_grid_db[0], "grid_points": {N: len(g) for N, g in grids.items()}}
    return summary, curve


def _slope(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.polyfit(x, y, 1)[0])


def run_sumrate_vs_power(cfg: ExperimentConfig, decade_db: float = 10.0) -> tuple[Table, Table]:
    """Mean sum rate over the power grid at N = first grid entry, and the
    least-squares slope of rate versus ln P over the top ``decade_db``.

    Returns the rate table (P_db, scheme, mean_rate_nats, stderr,
    singular_trials) and the slope table (scheme, slope, stderr, P_db_low,
    P_db_high). The slope standard error comes from per-trial slopes.
    """
    P_db = np.asarray(cfg.P_grid_db)
    top = P_db >= P_db.max() - decade_db - 1e-9
    if top.sum() < 2:
        raise ValueError("the power grid needs at least two points in its top decade")
    N = cfg.N_grid[0]
    out = _pmap(partial(_scheme_task, cfg=cfg, tag=_TAG_POWER, P_list=cfg.P_grid), [(N, i) for i in range(cfg.trials)], cfg.workers)
    rates = np.stack([r for r, _, _ in out])  # (trials, schemes, P)
    table = Table("sumrate_vs_power", ("P_db", "scheme", "mean_rate_nats", "stderr", "singular_trials"))
    slopes = Table("power_slopes", ("scheme", "slope", "stderr", "P_db_low", "P_db_high"))
    x = np.log(cfg.P_grid[top])
    for s, name in enumerate(cfg.schemes):
        means = []
        for j, p in enumerate(P_db):
            mean, se, n = _mean_se(rates[:, s, j])
            table.rows.append((float(p), name, mean, se, cfg.trials - n))
            means.append(mean)
        means = np.asarray(means)
        y = rates[:, s][:, top]
        good = np.all(np.isfinite(y), axis=1)
        per_trial = np.polyfit(x, y[good].T, 1)[0] if good.sum() > 0 else np.array([np.nan])
        _, se, _ = _mean_se(per_trial)
        slopes.rows.append((name, _slope(x, means[top]), se, float(P_db[top].min()), float(P_db.max())))
    table.notes = {"N": N, "dpc_sweep_limit_hits": sum(c for *_, c in out)}
    return table, slopes


def _feedback_task(args, cfg, beta):
    N, trial = args
    H = _channels(cfg, _TAG_FEEDBACK, N, trial)
    pool = modes_from_channels(H)
    t = cfg.threshold_at(N)
    cands = preselect(pool, t)
    a1 = greedy_select(cands, cfg.M)
    a2 = interactive_select(pool, t, beta, cfg.M)
    return a1.ledger.real_values_fed_back, a2.ledger.real_values_fed_back, len(cands)


def run_feedback_vs_users(cfg: ExperimentConfig) -> Table:
    """Mean number of real values fed back per user for both algorithms.

    Columns: N, algorithm, mean_feedback_per_user, stderr, t, beta.
    ``notes['algorithm1_exact']`` records whether the greedy ledger equaled
    2M|S0| on every trial.
    """
    beta = cfg.beta_value()
    tasks = [(N, i) for N in cfg.N_grid for i in range(cfg.trials)]
    out = np.array(_pmap(partial(_feedback_task, cfg=cfg, beta=beta), tasks, cfg.workers), dtype=float)
    table = Table("feedback", ("N", "algorithm", "mean_feedback_per_user", "stderr", "t", "beta"))
    exact = True
    for a, N in enumerate(cfg.N_grid):
        block = out[a * cfg.trials : (a + 1) * cfg.trials]
        exact &= bool(np.all(block[:, 0] == 2 * cfg.M * block[:, 2]))
        t = cfg.threshold_at(N)
        for name, col in (("algorithm1", 0), ("algorithm2", 1)):
            mean, se, _ = _mean_se(block[:, col] / N)
            table.rows.append((N, name, mean, se, t, beta))
    table.notes = {"algorithm1_exact": exact}
    return table


# ---------------------------------------------------------------------------
# validation suite


@dataclass
class Statistic:
    """One validation statistic with its check.

    ``target`` is the reference value (if any) and ``[lower, upper]`` the
    acceptance interval; ``passed`` is None for purely reported values.
    """

    name: str
    estimate: float
    stderr: float
    n: int
    target: float = np.nan
    lower: float = -np.inf
    upper: float = np.inf
    passed: bool | None = None
    detail: str = ""


@dataclass
class ValidationReport:
    statistics: list = field(default_factory=list)

    def add(self, stat: Statistic) -> Statistic:
        self.statistics.append(stat)
        return stat

    def __getitem__(self, name: str) -> Statistic:
        for s in self.statistics:
            if s.name == name:
                return s
        raise KeyError(name)

    def names(self) -> list[str]:
        return [s.name for s in self.statistics]

    @property
    def passed(self) -> bool:
        return all(s.passed is not False for s in self.statistics)

    def as_table(self) -> Table:
        cols = ("statistic", "estimate", "stderr", "n", "target", "lower", "upper", "passed", "detail")
        rows = [
            (s.name, s.estimate, s.stderr, s.n, s.target, s.lower, s.upper, "" if s.passed is None else str(s.passed).lower(), s.detail)
            for s in self.statistics
        ]
        return Table("validation", cols, rows)


def lambda_max_samples(H: np.ndarray) -> np.ndarray:
    """Largest eigenvalue of H H^* for an (n, K, M) stack, via the smaller Gram."""
    K, M = H.shape[1:]
    G = H @ np.swapaxes(H.conj(), 1, 2) if K <= M else np.swapaxes(H.conj(), 1, 2) @ H
    if G.shape[1] == 1:
        return G[:, 0, 0].real
    if G.shape[1] == 2:
        a, d = G[:, 0, 0].real, G[:, 1, 1].real
        b2 = np.abs(G[:, 0, 1]) ** 2
        return 0.5 * (a + d) + np.sqrt(0.25 * (a - d) ** 2 + b2)
    return np.linalg.eigvalsh(G)[:, -1]


def _second_eigenvalues(H: np.ndarray) -> np.ndarray:
    """Second largest eigenvalue of H H^* for an (n, K, M) stack, min(K, M) >= 2."""
    K, M = H.shape[1:]
    G = H @ np.swapaxes(H.conj(), 1, 2) if K <= M else np.swapaxes(H.conj(), 1, 2) @ H
    if G.shape[1] == 2:
        a, d = G[:, 0, 0].real, G[:, 1, 1].real
        return 0.5 * (a + d) - np.sqrt(0.25 * (a - d) ** 2 + np.abs(G[:, 0, 1]) ** 2)
    return np.linalg.eigvalsh(G)[:, -2]


def overlap_ks(M: int, samples: int, stream: np.random.Generator, K: int = 1):
    """KS test of overlaps between leading right vectors of independent
    channels against 1 - (1-z)^{M-1}. Returns (D, p-value)."""
    _, right, _ = batch_modes(sample_channels(2 * samples, K, M, stream))
    v = right[:, 0, :]
    z = np.minimum(np.abs(np.sum(v[:samples].conj() * v[samples:], axis=1)) ** 2, 1.0)
    res = stats.kstest(z, lambda x: overlap_cdf(np.clip(x, 0.0, 1.0), M))
    return float(res.statistic), float(res.pvalue)


def projection_ks(i: int, M: int, samples: int, stream: np.random.Generator):
    """KS test of |Q_i^* psi|^2 against Beta(i, M-i), where Q_i is a
    Gram-Schmidt (QR) orthonormal basis of i Gaussian vectors and psi an
    independent isotropic unit vector. Returns (D, p-value)."""
    A = sample_channels(samples, M, i, stream)
    Q, _ = np.linalg.qr(A)
    psi = random_unit_vectors(samples, M, stream)
    z = np.sum(np.abs(np.einsum("nmi,nm->ni", Q.conj(), psi)) ** 2, axis=1)
    res = stats.kstest(np.clip(z, 0.0, 1.0), lambda x: projection_beta_cdf(np.clip(x, 0.0, 1.0), i, M))
    return float(res.statistic), float(res.pvalue)


def lambda_max_tail_mc(t_values, M: int, K: int, samples: int, stream: np.random.Generator, chunk: int = 1_000_000):
    """Monte Carlo estimate of Prob{lambda_max > t} for each t. Returns
    (estimates, standard errors)."""
    t_values = np.asarray(t_values, dtype=float)
    hits = np.zeros(t_values.size)
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        lam = lambda_max_samples(sample_channels(n, K, M, stream))
        hits += np.sum(lam[:, None] > t_values[None, :], axis=0)
        done += n
    p = hits / samples
    return p, np.sqrt(p * (1 - p) / samples)


def eta_estimate(N: int, M: int, K: int, ensembles: int, seed: int, t: float | None = None):
    """Fraction of ensembles of N users in which some user's lambda_max
    exceeds t (default ln N + (M+K-1) lnln N). Returns (eta, stderr, t)."""
    if t is None:
        t = log(N) + (M + K - 1) * log(log(N))
    hits = np.array(
        [bool(np.any(lambda_max_samples(sample_channels(N, K, M, rng_stream(seed, _TAG_ETA, N, e))) > t)) for e in range(ensembles)]
    )
    eta = float(hits.mean())
    return eta, sqrt(eta * (1 - eta) / ensembles), t


def kappa_estimate(i: int, M: int, alpha: float, samples: int, stream: np.random.Generator, chunk: int = 200_000):
    """Conditional probability that an isotropic unit vector has overlap
    below ``alpha`` with the i-th of i orthonormal directions, given overlap
    below ``alpha`` with the first i-1. Returns (kappa, stderr, hits)."""
    if not 2 <= i <= M - 1:
        raise ValueError(f"kappa needs 2 <= i <= M-1, got i={i}, M={M}")
    cond = good = 0
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        z = np.abs(random_unit_vectors(n, M, stream)[:, :i]) ** 2
        c = np.all(z[:, : i - 1] < alpha, axis=1)
        cond += int(c.sum())
        good += int(np.sum(c & (z[:, i - 1] < alpha)))
        done += n
    if cond < 100:
        warnings.warn(f"only {cond} samples satisfy the conditioning event", InsufficientSamplesWarning, stacklevel=2)
    k = good / cond if cond else np.nan
    return k, sqrt(k * (1 - k) / cond) if cond else np.nan, cond


def _theorem2(N: int, M: int, K: int) -> float:
    return threshold_preset(N, M, K, ThresholdPreset(ThresholdMode.THEOREM2_SUFFICIENT))


def _trend(name, a, b, n_a, n_b, decreasing: bool, quick: bool, detail: str) -> Statistic:
    """Two-sample z statistic for a change from a to b (means with SEs).

    The full check requires the stated direction at 95% confidence; the quick
    check only requires that the opposite direction is not significant.
    """
    (ma, sa), (mb, sb) = a, b
    diff = (ma - mb) if decreasing else (mb - ma)
    se = sqrt(sa**2 + sb**2)
    z = diff / se if se > 0 else (np.inf if diff > 0 else -np.inf if diff < 0 else 0.0)
    lower = -Z95 if quick else Z95
    return Statistic(name, float(diff), float(se), n_a + n_b, 0.0, lower, np.inf, bool(z > lower), f"{detail}; z={z:.3f}")


def _prop_trend(name, a, b, decreasing: bool, quick: bool, detail: str) -> Statistic:
    """Pooled two-proportion z test for a change from a to b, each given as
    (fraction, stderr, n). Unlike the Wald form it stays meaningful when one
    of the counts is zero."""
    (pa, _, na), (pb, _, nb) = a, b
    pool = (pa * na + pb * nb) / (na + nb)
    diff = (pa - pb) if decreasing else (pb - pa)
    se = sqrt(pool * (1 - pool) * (1 / na + 1 / nb))
    z = diff / se if se > 0 else 0.0
    lower = -Z95 if quick else Z95
    return Statistic(name, float(diff), float(se), na + nb, 0.0, lower, np.inf, bool(z > lower), f"{detail}; pooled z={z:.3f}")


def _frac(x) -> tuple[float, float, int]:
    x = np.asarray(x, dtype=float)
    m = float(x.mean())
    return m, sqrt(m * (1 - m) / x.size), x.size


def _omega_trial(seed, N, trial, M, K):
    """Whether one user contributes two or more of the greedy picks."""
    H = sample_channels(N, K, M, rng_stream(seed, _TAG_OMEGA, N, trial))
    t = _theorem2(N, M, K)
    # the event needs some user with two modes above t; skip the search otherwise
    if min(K, M) < 2 or not np.any(_second_eigenvalues(H) > t):
        return False
    sel = greedy_select(preselect(modes_from_channels(H), t), M)
    users = [u for u, _ in sel.coordinates]
    return len(users) != len(set(users))


def omega_incidence(N: int, M: int, K: int, trials: int, seed: int, workers: int = 1):
    """Fraction of trials (sufficient-condition threshold, greedy search) in which some
    user contributes at least two coordinates. Returns (fraction, stderr, n)."""
    return _frac(_pmap(partial(_wrap, f=_omega_trial, seed=seed, N=N, M=M, K=K), range(trials), workers))


def _eps_trial(seed, N, trial, M, K, eps):
    H = sample_channels(N, K, M, rng_stream(seed, _TAG_EPS, N, trial))
    sel = greedy_select(preselect(modes_from_channels(H), _theorem2(N, M, K)), M)
    if sel.shortfall:
        return True
    V = sel.right
    z = np.abs(V.conj() @ V.T) ** 2
    return bool(np.max(z[np.triu_indices(len(sel), 1)]) >= eps)


def _gram_trial(seed, N, trial, M, K):
    H = sample_channels(N, K, M, rng_stream(seed, _TAG_GRAM, N, trial))
    sel = greedy_select(preselect(modes_from_channels(H), _theorem2(N, M, K)), M)
    if sel.shortfall:
        return np.nan
    rows = np.sqrt(sel.eigenvalues)[:, None] * sel.right.conj()
    gam, ok = batch_gram_inverse_diag(rows[None])
    return float(gam[0].sum()) if ok[0] else np.nan


def _lemma6_trial(seed, N, trial, M, K, P):
    H = sample_channels(N, K, M, rng_stream(seed, _TAG_L6, N, trial))
    sel = random_select(modes_from_channels(H), M, rng_stream(seed, _TAG_L6, N, trial, 1), pool_threshold=log(N))
    return zf_rate(sel, P) / dpc_sum_capacity(H, P)


def _L_count(seed, N, trial, M, K, t):
    H = sample_channels(N, K, M, rng_stream(seed, _TAG_L, N, trial, K))
    return int(np.sum(batch_modes(H)[0] > t))


@dataclass(frozen=True)
class LemmaSettings:
    """Sizes and tolerances of the validation suite. :meth:`quick` shrinks
    the sample sizes and widens every tolerance."""

    n_small: int = 100
    n_large: int = 10_000
    ks_samples: int = 100_000
    ks_tol: float = 0.01
    proj_tol: float = 0.015
    L_N: tuple = (1_000, 10_000)
    L_rel: float = 0.30
    eta_ensembles: int = 2000
    eta_factor: float = 2.0
    kappa_samples: int = 400_000
    kappa_band: tuple = (0.03, 0.05)
    gram_rel: float = 0.35
    omega_trials: tuple = (400_000, 60_000)
    lemma6_trials: int = 2000
    slope_trials: int = 200
    slope_rel: float = 0.10
    tdma_slope_rel: float = 0.15
    quick_mode: bool = False

    @classmethod
    def quick(cls) -> "LemmaSettings":
        return cls(
            n_large=1_000,
            ks_samples=10_000,
            ks_tol=0.01 * sqrt(10.0),
            proj_tol=0.015 * sqrt(10.0),
            L_N=(300, 1_000),
            L_rel=0.60,
            eta_ensembles=200,
            eta_factor=4.0,
            kappa_samples=100_000,
            kappa_band=(0.02, 0.06),
            gram_rel=0.70,
            omega_trials=(2_000, 2_000),
            lemma6_trials=20,
            slope_trials=20,
            slope_rel=0.20,
            tdma_slope_rel=0.30,
            quick_mode=True,
        )


def run_lemma_validation(cfg: ExperimentConfig, settings: LemmaSettings | None = None) -> ValidationReport:
    """Estimate the finite-N statistics behind the asymptotic analysis.

    Statistics are computed at fixed canonical dimensions (M = 2 unless a
    check needs otherwise); ``cfg.trials`` is the number of channel ensembles
    per N for the trend and mean checks, and ``cfg.quick`` selects
    :meth:`LemmaSettings.quick`.
    """
    st = settings or (LemmaSettings.quick() if cfg.quick else LemmaSettings())
    seed, T, w, q = cfg.master_seed, cfg.trials, cfg.workers, st.quick_mode
    rep = ValidationReport()
    n1, n2 = st.n_small, st.n_large

    # eigenvector overlaps of independent users
    for M in (2, 3, 4):
        D, p = overlap_ks(M, st.ks_samples, rng_stream(seed, _TAG_OVERLAP, M))
        rep.add(Statistic(f"ks_overlap_M{M}", D, np.nan, st.ks_samples, 0.0, 0.0, st.ks_tol, D < st.ks_tol, f"KS p-value {p:.3g}"))
    for i, M in ((1, 3), (2, 3), (2, 4)):
        D, p = projection_ks(i, M, st.ks_samples, rng_stream(seed, _TAG_PROJ, i, M))
        rep.add(Statistic(f"ks_projection_i{i}_M{M}", D, np.nan, st.ks_samples, 0.0, 0.0, st.proj_tol, D < st.proj_tol, f"KS p-value {p:.3g}"))

    # size of the pre-selected set against N times the tail probability
    for N in st.L_N:
        for K in (1, 2):
            t = _theorem2(N, 2, K)
            L = _pmap(partial(_L_wrap, seed=seed, N=N, M=2, K=K, t=t), range(T), w)
            m, se, n = _mean_se(L)
            target = N * lambda_max_tail(t, 2, K)
            lo, hi = (1 - st.L_rel) * target, (1 + st.L_rel) * target
            rep.add(Statistic(f"L_mean_N{N}_K{K}", m, se, n, target, lo, hi, lo <= m <= hi, f"t={t:.4f}"))

    # one user contributing two coordinates (K = 2)
    # the event is rare (order 1e-4 at N = 100), so it has its own trial counts
    To = dict(zip((n1, n2), st.omega_trials))
    om = {N: omega_incidence(N, 2, 2, To[N], seed, w) for N in (n1, n2)}
    for N in (n1, n2):
        rep.add(Statistic(f"omega_J_N{N}", om[N][0], om[N][1], om[N][2]))
    rep.add(_prop_trend("omega_J_trend", om[n1], om[n2], True, q, f"N={n1} -> N={n2}"))

    # fixed-epsilon orthogonality failures of the greedy set
    eps = cfg.epsilon_orth
    ef = {N: _frac(_pmap(partial(_wrap, f=_eps_trial, seed=seed, N=N, M=2, K=1, eps=eps), range(T), w)) for N in (n1, n2)}
    for N in (n1, n2):
        rep.add(Statistic(f"eps_orth_fail_rate_N{N}", ef[N][0], ef[N][1], ef[N][2], detail=f"epsilon={eps}"))
    rep.add(_prop_trend("eps_orth_fail_trend", ef[n1], ef[n2], True, q, f"N={n1} -> N={n2}"))

    # probability that some user exceeds t = ln N + (M+K-1) lnln N
    eta, se, t = eta_estimate(n2, 2, 2, st.eta_ensembles, seed)
    target = 1.0 / (gamma(2) * gamma(2) * log(n2))
    lo, hi = target / st.eta_factor, target * st.eta_factor
    rep.add(Statistic(f"eta_N{n2}", eta, se, st.eta_ensembles, target, lo, hi, lo <= eta <= hi, f"t={t:.4f}"))

    # conditional orthogonality probability kappa_i
    k, se, hits = kappa_estimate(2, 4, 0.02, st.kappa_samples, rng_stream(seed, _TAG_KAPPA))
    lo, hi = st.kappa_band
    rep.add(Statistic("kappa_i2_M4", k, se, hits, 0.04, lo, hi, lo <= k <= hi, "alpha=0.02"))

    # inverse Gram trace against M / ln N
    g = _pmap(partial(_wrap, f=_gram_trial, seed=seed, N=n2, M=2, K=1), range(T), w)
    m, se, n = _mean_se(g)
    target = 2.0 / log(n2)
    lo, hi = (1 - st.gram_rel) * target, (1 + st.gram_rel) * target
    rep.add(Statistic(f"inv_gram_trace_N{n2}", m, se, n, target, lo, hi, lo <= m <= hi, f"{T - n} shortfall/singular trials dropped"))

    # random coordinates among the pre-selected ones versus DPC
    T6 = min(T, st.lemma6_trials)
    P = float(cfg.P_grid[0])
    r6 = {N: _mean_se(_pmap(partial(_wrap, f=_lemma6_trial, seed=seed, N=N, M=2, K=1, P=P), range(T6), w)) for N in (n1, n2)}
    for N in (n1, n2):
        rep.add(Statistic(f"lemma6_ratio_N{N}", r6[N][0], r6[N][1], r6[N][2]))
    rep.add(_trend("lemma6_ratio_trend", r6[n1][:2], r6[n2][:2], r6[n1][2], r6[n2][2], False, q, f"N={n1} -> N={n2}"))

    # multiplexing gains
    Ts = min(T, st.slope_trials)
    for M in (2, 4):
        pc = replace(
            cfg, M=M, K=1, N_grid=(n1,), P_grid_db=tuple(np.arange(20.0, 31.0, 2.0)), trials=Ts,
            schemes=("proposed_wf", "tdma", "random_dpc"), threshold=ThresholdPreset(), quick=q,
        )
        _, slopes = run_sumrate_vs_power(pc)
        for name, slope, se, _, _ in slopes.rows:
            target = min(M, 1) if name == "tdma" else M
            rel = st.tdma_slope_rel if name == "tdma" else st.slope_rel
            lo, hi = (1 - rel) * target, (1 + rel) * target
            rep.add(Statistic(f"slope_{name}_M{M}", slope, se, Ts, target, lo, hi, lo <= slope <= hi, "20-30 dB"))
    return rep


def _wrap(trial, f, **kw):
    return f(trial=trial, **kw)


def _L_wrap(trial, seed, N, M, K, t):
    return _L_count(seed, N, trial, M, K, t)
