"""OSPC curves for several thresholds next to proportional fair scheduling.

    python3 scripts/compare_pfs.py [--out results/compare_pfs.csv]
"""
import argparse
from pathlib import Path

import numpy as np

from ospc.cli import cmd_compare_pfs
from ospc.config import ExperimentConfig

HERE = Path(__file__).parent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=str(HERE / "configs" / "compare_pfs.json"))
    ap.add_argument("--out", default="results/compare_pfs.csv")
    args = ap.parse_args()

    cfg = ExperimentConfig.load(args.config)
    table = cmd_compare_pfs(cfg)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(table.to_csv(), newline="")

    pfs = sorted((r[2], r[4]) for r in table.rows if r[0] == "pfs")
    se, db = np.array(pfs).T
    print(f"spectral efficiency in {cfg.rate_unit}; columns are Eb/N0 in dB")
    print("  SE    " + "".join(f"k={k:<7g}" for k in cfg.kappas) + "PFS")
    for g in cfg.spectral_efficiencies:
        cells = [next(r[4] for r in table.rows if r[0] == "ospc" and r[1] == k and r[2] == g) for k in cfg.kappas]
        p = np.interp(g, se, db) if se[0] <= g <= se[-1] else float("nan")
        print(f"  {g:<6g}" + "".join(f"{c:<9.3f}" for c in cells) + f"{p:.3f}")


if __name__ == "__main__":
    main()
