"""
Command-line front end: ``mimo-bc <command> [options]``.

Commands map one to one onto the experiment runners and write CSV tables
plus a JSON manifest into ``--out-dir``. Exit status: 0 on success, 1 on any
error (including usage errors), 2 when ``validate-lemmas`` finds a failing
check.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import __version__
from .config import ConfigError, config_to_dict, parse_config
from .experiments import (
    run_feedback_vs_users,
    run_lemma_validation,
    run_sumrate_vs_power,
    run_sumrate_vs_users,
    run_threshold_sweep,
)
from .output import RunManifest, config_digest, emit_csv

COMMANDS = ("sumrate-vs-users", "threshold-sweep", "sumrate-vs-power", "feedback", "validate-lemmas")

# per-command defaults, below the config file and flags in precedence
_BASE = {
    "sumrate-vs-power": {"n": "100", "p_db": ",".join(str(x) for x in range(0, 32, 2))},
    "feedback": {"n": "100,200,500", "threshold_mode": "theorem2_sufficient"},
}
_QUICK_TRIALS = 100


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mimo-bc", description="MIMO broadcast eigenmode scheduling experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="flat key = value config file")
        s.add_argument("--seed", help="master seed (falls back to $MIMO_BC_SEED, then 0)")
        s.add_argument("--trials")
        s.add_argument("--M", dest="m")
        s.add_argument("--K", dest="k")
        s.add_argument("--N", dest="n", action="append", help="user count; repeatable")
        s.add_argument("--P-db", dest="p_db", action="append", help="power in dB; repeatable")
        s.add_argument("--threshold-mode", dest="threshold_mode")
        s.add_argument("--rho-offset", dest="rho_offset")
        s.add_argument("--t", help="fixed pre-selection threshold")
        s.add_argument("--beta")
        s.add_argument("--schemes", help="comma separated scheme names")
        s.add_argument("--workers")
        s.add_argument("--out-dir", type=Path, default=Path("results"))
        s.add_argument("--quick", action="store_true", help="reduced sizes and widened tolerances")
    return p


def _flags(ns) -> dict:
    keys = ("seed", "trials", "m", "k", "n", "p_db", "threshold_mode", "rho_offset", "t", "beta", "schemes", "workers")
    out = {k: getattr(ns, k) for k in keys if getattr(ns, k) is not None}
    for k in ("n", "p_db"):
        if k in out:
            out[k] = ",".join(out[k])
    if ns.quick:
        out["quick"] = "true"
    return out


def run(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    try:
        flags = _flags(ns)
        cfg = parse_config(ns.config, flags, _BASE.get(ns.command))
        if cfg.quick and ns.command != "validate-lemmas" and "trials" not in flags:
            cfg = parse_config(ns.config, {**flags, "trials": str(min(cfg.trials, _QUICK_TRIALS))}, _BASE.get(ns.command))
        ns.out_dir.mkdir(parents=True, exist_ok=True)
        start = time.perf_counter()
        tables, notes, status = _dispatch(ns.command, cfg)
        written = {}
        for tab in tables:
            path = emit_csv(tab, ns.out_dir)
            written[path.name] = len(tab.rows)
            if tab.notes:
                notes[tab.name] = tab.notes
        conf = config_to_dict(cfg)
        RunManifest(
            ns.command, config_digest(conf), cfg.master_seed, __version__, written,
            round(time.perf_counter() - start, 3), conf, notes,
        ).write(ns.out_dir)
        for name, rows in written.items():
            print(f"wrote {ns.out_dir / name} ({rows} rows)")
        return status
    except (ConfigError, ValueError, OSError) as exc:
        print(f"mimo-bc: error: {exc}", file=sys.stderr)
        return 1


def _dispatch(command: str, cfg):
    if command == "sumrate-vs-users":
        return [run_sumrate_vs_users(cfg)], {}, 0
    if command == "threshold-sweep":
        return list(run_threshold_sweep(cfg)), {}, 0
    if command == "sumrate-vs-power":
        return list(run_sumrate_vs_power(cfg)), {}, 0
    if command == "feedback":
        return [run_feedback_vs_users(cfg)], {}, 0
    report = run_lemma_validation(cfg)
    for s in report.statistics:
        if s.passed is not None:
            print(f"{'PASS' if s.passed else 'FAIL'} {s.name}: {s.estimate:.6g} (accept [{s.lower:.6g}, {s.upper:.6g}]) {s.detail}")
    return [report.as_table()], {"all_passed": report.passed}, 0 if report.passed else 2


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
