"""Command-line entry points: run experiment suites, check the estimator
rate, aggregate trace directories, and serve live sessions."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np


def _cmd_run(args) -> int:
    from .harness import ExperimentConfig, run_suite, run_trial, write_trace

    cfg = ExperimentConfig.from_file(args.config)
    if args.seeds:
        seeds = tuple(int(s) for s in args.seeds.replace(",", " ").split())
        cfg = replace(cfg, seeds=seeds)
    if args.out:
        cfg = replace(cfg, output_dir=args.out)
    if args.workers:
        cfg = replace(cfg, workers=args.workers)
    if len(cfg.seeds) == 1:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        trace = run_trial(cfg, cfg.seeds[0])
        write_trace(
            out / f"trace_seed{cfg.seeds[0]}.csv", trace, cfg.rho_values,
            cfg.spec().domain.dim,
        )
        if trace.aborted:
            print(f"trial aborted: {trace.abort_reason}", file=sys.stderr)
            return 1
        print(f"wrote {out / f'trace_seed{cfg.seeds[0]}.csv'}")
        return 0
    summary = run_suite(cfg)
    print(
        f"{len(cfg.seeds)} seeds done, {summary['n_aborted']} aborted; "
        f"outputs under {cfg.output_dir}"
    )
    return 0


def _cmd_rate_check(args) -> int:
    from .noise import TrueUncertaintyOracle, rate_check

    oracle = TrueUncertaintyOracle(
        family=args.family,
        center=[args.center] * args.dim,
        spread=[args.spread] * args.dim,
        scale=args.a,
        dof=args.dof,
    )
    n_grid = [int(v) for v in args.n_grid.replace(",", " ").split()]
    res = rate_check(
        oracle, n_grid, alpha=args.alpha, beta=args.beta, trials=args.trials,
        rng=np.random.default_rng(args.seed),
    )
    payload = {
        "slope": res.slope,
        "anchor_counts": res.anchor_counts.tolist(),
        "mse": res.mse.tolist(),
        "bandwidths": res.bandwidths.tolist(),
        "theoretical_slope": -2.0 * args.beta / (2.0 * args.beta + args.dim),
    }
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def _cmd_aggregate(args) -> int:
    from .harness import aggregate_directory

    info = aggregate_directory(args.directory)
    print(f"aggregated {len(info['files'])} traces ({info['rows']} rows each)")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(data_dir=args.data_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hetpbo")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a configured experiment suite")
    run.add_argument("--config", required=True)
    run.add_argument("--seeds", help="comma-separated seed override")
    run.add_argument("--out", help="output directory override")
    run.add_argument("--workers", type=int, help="parallel trial workers")
    run.set_defaults(fn=_cmd_run)

    rc = sub.add_parser("rate-check", help="variance estimator rate check")
    rc.add_argument("--n-grid", default="50,100,200,400,800,1600")
    rc.add_argument("--alpha", type=float, default=0.3)
    rc.add_argument("--beta", type=float, default=2.0)
    rc.add_argument("--trials", type=int, default=50)
    rc.add_argument("--dim", type=int, default=1)
    rc.add_argument("--family", default="gaussian", choices=["gaussian", "student_t"])
    rc.add_argument("--dof", type=float, default=None)
    rc.add_argument("--center", type=float, default=0.25)
    rc.add_argument("--spread", type=float, default=0.125)
    rc.add_argument("--a", type=float, default=0.1)
    rc.add_argument("--seed", type=int, default=0)
    rc.add_argument("--out")
    rc.set_defaults(fn=_cmd_rate_check)

    agg = sub.add_parser("aggregate", help="recompute aggregates from traces")
    agg.add_argument("directory")
    agg.set_defaults(fn=_cmd_aggregate)

    srv = sub.add_parser("serve", help="serve live preference sessions")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8760)
    srv.add_argument("--data-dir", default="sessions-data")
    srv.set_defaults(fn=_cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
