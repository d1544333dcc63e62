"""Command line entry point: ``ospc <subcommand> [--config FILE] ...``.

Exit codes: 0 success, 1 a validation check failed, 2 usage error (including a
missing config file), 3 invalid config.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import LN2, AnalysisConfig, energy_efficiency, pfs_curve, to_db, tradeoff_table
from .channel import DegeneratePolicyError, UnattainableDelayError
from .config import ConfigError, ExperimentConfig, ResultTable
from .scheduler import ClassThresholds
from .simulator import SimConfig, run, run_ensemble, stability_report

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_CONFIG = 0, 1, 2, 3


def _unit_energy(value_per_nat: float, unit: str) -> float:
    return value_per_nat * LN2 if unit == "bits" else value_per_nat


def _analysis(cfg: ExperimentConfig, load_nats: float, kappa: float = 0.0) -> AnalysisConfig:
    return AnalysisConfig(load_nats, cfg.pathloss(), cfg.fading_law(), kappa)


def cmd_tradeoff(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Energy against delay, one block of rows per spectral efficiency."""
    u = cfg.rate_unit
    table = ResultTable(["spectral_efficiency", "delay", "kappa", "gamma", "eb_n0", "eb_n0_db"])
    for g in cfg.spectral_efficiencies:
        for row in tradeoff_table(cfg.delays, _analysis(cfg, cfg.to_nats(g))):
            e = _unit_energy(row.energy, u)
            table.add(float(g), row.delay, row.kappa, row.gamma, e, float(to_db(e)))
    return table


def cmd_compare_pfs(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """OSPC energy curves for each kappa next to the proportional fair curve."""
    u = cfg.rate_unit
    table = ResultTable(["scheme", "kappa", "spectral_efficiency", "eb_n0", "eb_n0_db"])
    for kappa in cfg.kappas:
        for g in cfg.spectral_efficiencies:
            e = _unit_energy(energy_efficiency(_analysis(cfg, cfg.to_nats(g), kappa)).value, u)
            table.add("ospc", float(kappa), float(g), e, float(to_db(e)))
    lo, hi, n = cfg.snr_db
    grid = 10.0 ** (np.linspace(lo, hi, int(n)) / 10.0)
    for p in pfs_curve(grid, cfg.pfs_users, cfg.pathloss()):
        e = p.energy(u)
        table.add("pfs", "", p.spectral_efficiency(u), e, float(to_db(e)))
    return table


def cmd_convergence(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Min and max finite-K energy over an ensemble, with the K-independent limit."""
    u = cfg.rate_unit
    fading = cfg.fading_law()
    table = ResultTable(["spectral_efficiency", "users", "min", "max", "mean", "spread", "asymptotic", "systems", "horizon"])
    for g in cfg.convergence_loads:
        load = cfg.to_nats(g)
        kappa = 0.0 if cfg.kappa is None else float(cfg.kappa)
        asym = _unit_energy(energy_efficiency(_analysis(cfg, load, kappa)).value, u)
        for k in cfg.users:
            sim = SimConfig(
                n_users=int(k), spectral_efficiency=load, pathloss=cfg.pathloss(), fading=fading,
                thresholds=ClassThresholds.single(kappa), arrival=cfg.arrival_law(),
                horizon=cfg.ensemble_horizon, n0=cfg.n0, warmup=cfg.warmup,
            )
            s = run_ensemble(sim, cfg.systems, base_seed=cfg.seed, n_jobs=threads)
            lo, hi, mean = (_unit_energy(v, u) for v in (s.min, s.max, s.mean))
            table.add(float(g), int(k), lo, hi, mean, hi - lo, asym, cfg.systems, cfg.ensemble_horizon)
    return table


def _thresholds(cfg: ExperimentConfig, fading) -> ClassThresholds:
    if cfg.class_delays:
        return ClassThresholds.from_delays(fading, cfg.class_delays, cfg.class_fractions)
    if cfg.kappa is not None:
        return ClassThresholds.single(cfg.kappa)
    return ClassThresholds.from_delays(fading, [cfg.delay if cfg.delay is not None else 1.0])


def cmd_simulate(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """One finite-K system; one row per user, system figures in the metadata."""
    fading = cfg.fading_law()
    th = _thresholds(cfg, fading)
    sim = SimConfig(
        n_users=cfg.n_users, spectral_efficiency=cfg.to_nats(cfg.spectral_efficiency), pathloss=cfg.pathloss(),
        fading=fading, thresholds=th, arrival=cfg.arrival_law(), horizon=cfg.horizon, n0=cfg.n0,
        seed=cfg.seed, warmup=cfg.warmup,
    )
    m = run(sim)
    verdict = stability_report(m)
    table = ResultTable([
        "user", "class", "pathloss", "mean_delay", "mean_delay_unweighted", "mean_busy_period",
        "max_busy_period", "selection_freq", "mean_demand_at_service", "unstable",
    ])
    for i in range(sim.n_users):
        table.add(
            i, int(m.class_id[i]), float(m.pathloss[i]), float(m.mean_delay[i]), float(m.mean_delay_unweighted[i]),
            float(m.mean_busy_period[i]), int(m.max_busy_period[i]), float(m.selection_freq[i]),
            float(m.mean_demand_at_service[i]), bool(verdict.unstable[i]),
        )
    gammas = th.gammas(fading)
    e = _unit_energy(m.energy_efficiency, cfg.rate_unit)
    table.metadata["summary"] = {
        "energy_efficiency": e,
        "energy_efficiency_db": float(to_db(e)) if e > 0 else None,
        "kappas": list(th.kappas),
        "target_delays": [float(1.0 / g) if g > 0 else None for g in gammas],
        "class_mean_delay": [m.class_mean_delay(c) for c in range(th.n_classes)],
        "warmup": m.warmup,
        "all_stable": verdict.all_stable,
    }
    return table


def cmd_validate(checks=None) -> tuple[ResultTable, bool]:
    from . import validation

    idx = range(len(validation.CHECKS)) if not checks else [c - 1 for c in checks]
    table = ResultTable(["check", "passed", "detail", "seconds"])
    ok = True
    for i in idx:
        res = validation.run_check(i)
        print(res.line(), file=sys.stderr, flush=True)
        table.add(res.name, res.passed, res.detail, round(res.seconds, 3))
        ok &= res.passed
    return table, ok


COMMANDS = {
    "tradeoff": cmd_tradeoff,
    "compare-pfs": cmd_compare_pfs,
    "convergence": cmd_convergence,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ospc", description="Delay-energy experiments for opportunistic superposition coding.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in [*COMMANDS, "validate"]:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON experiment file; defaults are used when omitted")
        s.add_argument("--out", help="output file (stdout when omitted)")
        s.add_argument("--format", choices=("csv", "json"), default="csv")
        s.add_argument("--seed", type=int, help="overrides the config seed")
        s.add_argument("--threads", type=int, default=1, help="worker processes for ensembles")
        s.add_argument("--paper-scale", action="store_true", help="1000-system ensembles of 10^4 slots")
        if name == "validate":
            s.add_argument("--check", type=int, action="append", help="run only this check number (repeatable)")
    return p


def load_config(args, parser) -> ExperimentConfig:
    if args.config is None:
        cfg = ExperimentConfig()
    else:
        if not Path(args.config).is_file():
            parser.error(f"config file not found: {args.config}")
        cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.paper_scale:
        cfg = replace(cfg, systems=1000, ensemble_horizon=10_000)
    return cfg


def _emit(table: ResultTable, args) -> None:
    text = table.render(args.format)
    if args.out is None:
        sys.stdout.write(text)
        return
    Path(args.out).write_text(text, encoding="utf-8", newline="")
    if args.format == "csv":
        # CSV has no room for metadata, keep it next to the table
        Path(args.out + ".meta.json").write_text(json.dumps(table.metadata, indent=2) + "\n", encoding="utf-8")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    if args.command == "validate" and args.check:
        from .validation import CHECKS

        if any(not 1 <= c <= len(CHECKS) for c in args.check):
            parser.error(f"--check takes numbers 1..{len(CHECKS)}")
    t0 = time.time()
    try:
        cfg = load_config(args, parser)
        if args.command == "validate":
            table, ok = cmd_validate(args.check)
        else:
            table, ok = COMMANDS[args.command](cfg, threads=args.threads), True
    except (ConfigError, DegeneratePolicyError, UnattainableDelayError) as exc:
        print(f"ospc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    table.metadata.update({
        "command": args.command,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "version": __version__,
        "wall_clock_seconds": round(time.time() - t0, 3),
        "started": time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(t0)),
    })
    _emit(table, args)
    return EXIT_OK if ok else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
