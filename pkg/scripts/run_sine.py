#!/usr/bin/env python3
"""Run the sine benchmark for all four acquisition kinds and print the
paired comparison of final risk-averse cumulative regrets."""

import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from hetpbo.harness import ExperimentConfig, run_suite

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "sine1d.cfg"


def main() -> int:
    base = ExperimentConfig.from_file(CONFIG)
    finals = {}
    for kind in ("anpei", "ei", "rahbo", "ucb"):
        cfg = replace(base, acq_kind=kind, output_dir=f"{base.output_dir}_{kind}")
        summary = run_suite(cfg)
        key = f"cum_regret_rho{base.rho_values[1]:g}"
        finals[kind] = np.array(summary["final"][key]["per_seed"])
        print(
            f"{kind:6s} best-f mean {summary['final']['best_f']['mean']:.4f}  "
            f"final risk-averse cum regret {finals[kind].mean():.3f}"
        )
    for averse, neutral in (("anpei", "ei"), ("rahbo", "ucb")):
        wins = int(np.sum(finals[averse] < finals[neutral]))
        print(f"{averse} beats {neutral} in {wins}/{len(finals[averse])} seeds")
    return 0


if __name__ == "__main__":
    sys.exit(main())
