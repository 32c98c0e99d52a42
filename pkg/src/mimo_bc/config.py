"""
Flat ``key = value`` run configuration.

Keys are case-insensitive and stored lowercase; ``#`` and ``;`` start
comments; lists are comma separated. Precedence, lowest first: built-in
defaults, per-command defaults, the config file, command-line flags.

=================  =======================================  ===================
key                meaning                                  default
=================  =======================================  ===================
m                  transmit antennas                        2
k                  receive antennas per user                1
n (n_grid)         user counts                              50, 100, 200
p_db (p_grid_db)   total power / SNR in dB                  10
trials             Monte Carlo trials per grid point        1000
seed               master seed (64-bit)                     0, or MIMO_BC_SEED
threshold_mode     fixed | theorem1_necessary | ...         fig1_empirical
rho_offset         free offset of the threshold rule        per mode
t                  fixed threshold (implies mode fixed)
beta               pruning level of the interactive search  e^{-q/M}
schemes            comma separated scheme names             all
epsilon_orth       orthogonality probe level                0.3
workers            worker processes                         1
quick              reduced sizes, widened tolerances        false
=================  =======================================  ===================
"""

from __future__ import annotations

import configparser
import os
from pathlib import Path

from .experiments import ExperimentConfig
from .precoding import SCHEMES
from .selection import ThresholdMode, ThresholdPreset

__all__ = ["ConfigError", "KEYS", "parse_config", "config_to_dict"]

SEED_ENV = "MIMO_BC_SEED"

_ALIASES = {"n_grid": "n", "p_grid_db": "p_db", "master_seed": "seed", "threshold": "threshold_mode"}
KEYS = (
    "m", "k", "n", "p_db", "trials", "seed", "threshold_mode", "rho_offset", "t",
    "beta", "schemes", "epsilon_orth", "workers", "quick",
)


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _int(key, raw, lo=None, hi=None) -> int:
    try:
        v = int(str(raw).strip())
    except ValueError:
        raise ConfigError(key, f"expected an integer, got {raw!r}") from None
    if lo is not None and v < lo:
        raise ConfigError(key, f"must be >= {lo}, got {v}")
    if hi is not None and v > hi:
        raise ConfigError(key, f"must be <= {hi}, got {v}")
    return v


def _float(key, raw) -> float:
    try:
        v = float(str(raw).strip())
    except ValueError:
        raise ConfigError(key, f"expected a number, got {raw!r}") from None
    if v != v or v in (float("inf"), float("-inf")):
        raise ConfigError(key, f"must be finite, got {raw!r}")
    return v


def _list(raw) -> list[str]:
    if isinstance(raw, (list, tuple)):
        return [str(x).strip() for x in raw]
    return [x.strip() for x in str(raw).split(",") if x.strip()]


def _bool(key, raw) -> bool:
    if isinstance(raw, bool):
        return raw
    s = str(raw).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(key, f"expected a boolean, got {raw!r}")


def _read_file(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string("[run]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from None
    if cp.sections() != ["run"]:
        raise ConfigError("config", "sections are not supported; use flat key = value lines")
    return dict(cp["run"])


def _normalize(raw: dict) -> dict:
    out = {}
    for key, value in raw.items():
        k = _ALIASES.get(key.strip().lower(), key.strip().lower())
        if k not in KEYS:
            raise ConfigError(k, f"unknown key (expected one of {', '.join(KEYS)})")
        if value is not None:
            out[k] = value
    return out


def parse_config(path=None, flags: dict | None = None, base: dict | None = None) -> ExperimentConfig:
    """Build a validated :class:`ExperimentConfig`.

    ``base`` holds per-command defaults, ``path`` a config file and ``flags``
    command-line values (``None`` entries are ignored). Later sources win.

    Raises
    ------
    ConfigError
        For unknown keys, malformed or out-of-range values; the message and
        ``key`` attribute name the offending key.
    """
    merged = _normalize(base or {})
    if path is not None:
        merged.update(_normalize(_read_file(path)))
    merged.update(_normalize(flags or {}))

    kw = {}
    if "m" in merged:
        kw["M"] = _int("M", merged["m"], 1, 8)
    if "k" in merged:
        kw["K"] = _int("K", merged["k"], 1, 8)
    if "n" in merged:
        kw["N_grid"] = tuple(_int("N", x, 1) for x in _list(merged["n"]))
        if not kw["N_grid"]:
            raise ConfigError("N", "empty user-count list")
    if "p_db" in merged:
        kw["P_grid_db"] = tuple(_float("P_db", x) for x in _list(merged["p_db"]))
        if not kw["P_grid_db"]:
            raise ConfigError("P_db", "empty power list")
    if "trials" in merged:
        kw["trials"] = _int("trials", merged["trials"], 1)
    seed = merged.get("seed", os.environ.get(SEED_ENV))
    if seed is not None:
        kw["master_seed"] = _int("seed", seed, 0, 2**64 - 1)
    if "beta" in merged:
        beta = _float("beta", merged["beta"])
        if not 0.0 <= beta <= 1.0:
            raise ConfigError("beta", f"must lie in [0, 1], got {beta}")
        kw["beta"] = beta
    if "epsilon_orth" in merged:
        eps = _float("epsilon_orth", merged["epsilon_orth"])
        if not 0.0 < eps < 1.0:
            raise ConfigError("epsilon_orth", f"must lie in (0, 1), got {eps}")
        kw["epsilon_orth"] = eps
    if "workers" in merged:
        kw["workers"] = _int("workers", merged["workers"], 1)
    if "quick" in merged:
        kw["quick"] = _bool("quick", merged["quick"])
    if "schemes" in merged:
        names = _list(merged["schemes"])
        bad = [s for s in names if s not in SCHEMES]
        if bad or not names:
            raise ConfigError("schemes", f"unknown scheme(s) {bad}; expected a subset of {', '.join(SCHEMES)}")
        kw["schemes"] = tuple(names)

    mode = merged.get("threshold_mode")
    if mode is not None:
        try:
            mode = ThresholdMode(str(mode).strip().lower())
        except ValueError:
            raise ConfigError("threshold_mode", f"unknown mode {mode!r}; expected one of {[m.value for m in ThresholdMode]}") from None
    offset = _float("rho_offset", merged["rho_offset"]) if "rho_offset" in merged else None
    if "t" in merged:
        if mode not in (None, ThresholdMode.FIXED):
            raise ConfigError("t", f"a fixed threshold conflicts with threshold_mode={mode.value}")
        mode, offset = ThresholdMode.FIXED, _float("t", merged["t"])
    elif mode is ThresholdMode.FIXED and offset is None:
        raise ConfigError("t", "threshold_mode=fixed needs a value for t")
    if mode is not None:
        kw["threshold"] = ThresholdPreset(mode, offset)
    preset = kw.get("threshold", ThresholdPreset())
    if preset.mode is not ThresholdMode.FIXED:
        small = [n for n in kw.get("N_grid", ExperimentConfig.N_grid) if n < 16]
        if small:
            raise ConfigError("N", f"N={small[0]} is below 16, not allowed with threshold_mode={preset.mode.value}")
    try:
        return ExperimentConfig(**kw)
    except ValueError as exc:
        raise ConfigError("config", str(exc)) from None


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Plain, JSON-friendly view of a configuration (used for the digest)."""
    return {
        "M": cfg.M,
        "K": cfg.K,
        "N_grid": list(cfg.N_grid),
        "P_grid_db": list(cfg.P_grid_db),
        "trials": cfg.trials,
        "schemes": list(cfg.schemes),
        "threshold_mode": cfg.threshold.mode.value,
        "rho_offset": cfg.threshold.rho_offset,
        "beta": cfg.beta,
        "master_seed": cfg.master_seed,
        "epsilon_orth": cfg.epsilon_orth,
        "quick": cfg.quick,
    }
