#!/usr/bin/env python3
"""Run the student-t noise and evidence-bandwidth ablations on the 4-d
benchmark, emitting one aggregate table per acquisition kind."""

import sys
from dataclasses import replace
from pathlib import Path

from hetpbo.harness import ExperimentConfig, run_suite

HERE = Path(__file__).resolve().parent.parent / "configs"


def main() -> int:
    for name in ("hartmann4d_student_t.cfg", "hartmann4d_evidence.cfg"):
        base = ExperimentConfig.from_file(HERE / name)
        print(f"== {name} ==")
        for kind in ("anpei", "ei", "rahbo", "ucb"):
            cfg = replace(
                base, acq_kind=kind, output_dir=f"{base.output_dir}_{kind}"
            )
            summary = run_suite(cfg)
            print(
                f"{kind:6s} aborted {summary['n_aborted']}  "
                f"best-f mean {summary['final']['best_f']['mean']:.4f}"
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())
