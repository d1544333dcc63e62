"""Delay-energy tradeoff table: energy in dB against delay for several loads.

    python3 scripts/tradeoff.py [--out results/tradeoff.csv]
"""
import argparse
from pathlib import Path

from ospc.cli import cmd_tradeoff
from ospc.config import ExperimentConfig

HERE = Path(__file__).parent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=str(HERE / "configs" / "tradeoff.json"))
    ap.add_argument("--out", default="results/tradeoff.csv")
    args = ap.parse_args()

    cfg = ExperimentConfig.load(args.config)
    table = cmd_tradeoff(cfg)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(table.to_csv(), newline="")

    for g in cfg.spectral_efficiencies:
        rows = [r for r in table.rows if r[0] == g]
        d1 = next(r for r in rows if r[1] == 1.0)
        print(f"Gamma={g:g} nats")
        for r in rows:
            print(f"  D={r[1]:5.2f}  kappa={r[2]:7.4f}  Eb/N0={r[5]:8.3f} dB  saving={d1[5] - r[5]:6.3f} dB")


if __name__ == "__main__":
    main()
