"""The full preference-optimization loop with metrics and file outputs.

One trial: sample anchors, answer a few random seed duels, then iterate
hallucinate -> refit -> propose -> ask the simulated human, recording the
mean-variance metrics per iteration. Suites fan seeds across processes and
aggregate per-iteration statistics.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .acquisition import AcqConfig, incumbent, propose_duel
from .benchmarks import (
    BenchmarkSpec,
    SimulatedHuman,
    make_benchmark,
    sample_anchors,
    true_noise_variance,
)
from .configfile import (
    get_float,
    get_floats,
    get_int,
    get_ints,
    get_str,
    load_config_file,
)
from .core import RbfKernelParams
from .inference import (
    HbPosterior,
    LaplacePosterior,
    duel_covariance,
    gibbs_hallucinate,
)
from .noise import AnchorModel, loo_bandwidth, noise_variance, save_points
from .prefmodel import DuelDataset, fit_hyperparams, fit_map

__all__ = [
    "ExperimentConfig",
    "TraceRow",
    "ExperimentTrace",
    "SuiteError",
    "mv_objective",
    "run_trial",
    "run_suite",
    "trace_to_csv",
    "write_trace",
    "read_trace_csv",
    "aggregate_directory",
]


class SuiteError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    benchmark: str = "sine1d"
    a: float | None = None
    oracle_family: str = "gaussian"
    oracle_dof: float | None = None
    oracle_center: tuple | None = None
    oracle_spread: tuple | None = None
    acq_kind: str = "anpei"
    gamma: float = 1.0
    eta: float = 2.0
    pool_per_dim: int = 1024
    refine_top: int = 8
    refine_steps: int = 50
    n_anchors: int = 30
    n_initial_duels: int = 5
    iterations: int = 30
    rho_values: tuple = (0.0,)
    seeds: tuple = (0,)
    backend: str = "hb"
    gibbs_burn_in: int = 50
    bandwidth_mode: str = "loo"
    refit_every: int = 1
    lengthscale_grid: int = 12
    signal_variance: float = 1.0
    workers: int = 1
    output_dir: str = "out"

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if not all(np.isfinite(r) for r in self.rho_values):
            raise ValueError("rho values must be finite")
        if self.backend not in ("hb", "laplace"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.bandwidth_mode not in ("loo", "evidence"):
            raise ValueError(f"unknown bandwidth mode {self.bandwidth_mode!r}")

    @classmethod
    def from_mapping(cls, m: dict[str, str]) -> "ExperimentConfig":
        center = get_floats(m, "benchmark.oracle.center")
        spread = get_floats(m, "benchmark.oracle.spread")
        kw = dict(
            benchmark=get_str(m, "benchmark.name", "sine1d"),
            a=get_float(m, "benchmark.a"),
            oracle_family=get_str(m, "benchmark.oracle.family", "gaussian"),
            oracle_dof=get_float(m, "benchmark.oracle.dof"),
            oracle_center=tuple(center) if center else None,
            oracle_spread=tuple(spread) if spread else None,
            acq_kind=get_str(m, "acquisition.kind", "anpei"),
            gamma=get_float(m, "acquisition.gamma", 1.0),
            eta=get_float(m, "acquisition.eta", 2.0),
            pool_per_dim=get_int(m, "acquisition.pool_per_dim", 1024),
            refine_top=get_int(m, "acquisition.refine_top", 8),
            refine_steps=get_int(m, "acquisition.refine_steps", 50),
            n_anchors=get_int(m, "experiment.n_anchors", 30),
            n_initial_duels=get_int(m, "experiment.n_initial_duels", 5),
            iterations=get_int(m, "experiment.iterations", 30),
            seeds=tuple(get_ints(m, "experiment.seeds", [0])),
            backend=get_str(m, "inference.backend", "hb"),
            gibbs_burn_in=get_int(m, "inference.gibbs_burn_in", 50),
            bandwidth_mode=get_str(m, "inference.bandwidth_mode", "loo"),
            refit_every=get_int(m, "inference.refit_every", 1),
            lengthscale_grid=get_int(m, "inference.lengthscale_grid", 12),
            signal_variance=get_float(m, "inference.signal_variance", 1.0),
            workers=get_int(m, "experiment.workers", 1),
            output_dir=get_str(m, "experiment.output_dir", "out"),
        )
        rho = get_floats(m, "experiment.rho")
        spec = make_benchmark(
            kw["benchmark"], a=kw["a"], oracle_family=kw["oracle_family"],
            dof=kw["oracle_dof"], oracle_center=kw["oracle_center"],
            oracle_spread=kw["oracle_spread"],
        )
        if rho is None:
            rho = [0.0, 3.0 * abs(spec.f_max)]
        kw["rho_values"] = tuple(rho)
        return cls(**kw)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_mapping(load_config_file(path))

    def to_mapping(self) -> dict[str, object]:
        m = {
            "benchmark.name": self.benchmark,
            "benchmark.oracle.family": self.oracle_family,
            "acquisition.kind": self.acq_kind,
            "acquisition.gamma": self.gamma,
            "acquisition.eta": self.eta,
            "acquisition.pool_per_dim": self.pool_per_dim,
            "acquisition.refine_top": self.refine_top,
            "acquisition.refine_steps": self.refine_steps,
            "experiment.n_anchors": self.n_anchors,
            "experiment.n_initial_duels": self.n_initial_duels,
            "experiment.iterations": self.iterations,
            "experiment.rho": list(self.rho_values),
            "experiment.seeds": list(self.seeds),
            "experiment.workers": self.workers,
            "experiment.output_dir": self.output_dir,
            "inference.backend": self.backend,
            "inference.gibbs_burn_in": self.gibbs_burn_in,
            "inference.bandwidth_mode": self.bandwidth_mode,
            "inference.refit_every": self.refit_every,
            "inference.lengthscale_grid": self.lengthscale_grid,
            "inference.signal_variance": self.signal_variance,
        }
        if self.a is not None:
            m["benchmark.a"] = self.a
        if self.oracle_dof is not None:
            m["benchmark.oracle.dof"] = self.oracle_dof
        if self.oracle_center is not None:
            m["benchmark.oracle.center"] = list(self.oracle_center)
        if self.oracle_spread is not None:
            m["benchmark.oracle.spread"] = list(self.oracle_spread)
        return m

    def spec(self) -> BenchmarkSpec:
        return make_benchmark(
            self.benchmark, a=self.a, oracle_family=self.oracle_family,
            dof=self.oracle_dof, oracle_center=self.oracle_center,
            oracle_spread=self.oracle_spread,
        )

    def acq(self) -> AcqConfig:
        return AcqConfig(
            kind=self.acq_kind, gamma=self.gamma, eta=self.eta,
            pool_per_dim=self.pool_per_dim, refine_top=self.refine_top,
            refine_steps=self.refine_steps,
        )


def mv_objective(x, spec: BenchmarkSpec, rho: float) -> float:
    """Mean-variance objective f(x) - rho * true_variance(x)."""
    return spec.f(x) - rho * true_noise_variance(spec, x)


@dataclass
class TraceRow:
    iteration: int
    challenger: np.ndarray
    winner: np.ndarray
    f_value: float
    sigma2_true: float
    sigma2_hat: float
    mv: dict
    simple_regret: float
    cum_regret: float
    wall_ms: float


@dataclass
class ExperimentTrace:
    seed: int
    rows: list = field(default_factory=list)
    aborted: bool = False
    abort_reason: str = ""
    metadata: dict = field(default_factory=dict)


class _Engine:
    """Shared fit/hallucinate/propose machinery for harness and service."""

    def __init__(self, domain, anchor_model, acq_cfg, backend="hb",
                 gibbs_burn_in=50, bandwidth_mode="loo", signal_variance=1.0,
                 lengthscale_grid=12):
        self.domain = domain
        self.noise = anchor_model
        self.acq_cfg = acq_cfg
        self.backend = backend
        self.gibbs_burn_in = gibbs_burn_in
        self.bandwidth_mode = bandwidth_mode
        self.signal_variance = signal_variance
        self.lengthscale_grid = lengthscale_grid
        diam = domain.diameter
        self.lengthscale_bounds = (1e-2 * diam, diam)
        self.kernel = RbfKernelParams(0.2 * diam, signal_variance)
        self._last_refit_m = -1
        self.refit_failures = 0

    def refit(self, dataset: DuelDataset) -> None:
        if dataset.m < 2 or dataset.m == self._last_refit_m:
            return
        self._last_refit_m = dataset.m
        mode = "joint" if self.bandwidth_mode == "evidence" else "lengthscale"
        bw_bounds = None
        if mode == "joint":
            diam = self.domain.diameter
            bw_bounds = (1e-3 * diam, diam)
        try:
            hp = fit_hyperparams(
                dataset, self.noise, self.lengthscale_bounds, mode=mode,
                bandwidth_bounds=bw_bounds, signal_variance=self.signal_variance,
                grid_size=self.lengthscale_grid,
            )
        except RuntimeError:
            # evidence can become numerically intractable once converged
            # queries pile contradictory duels onto a near-zero-noise spot;
            # keep the current hyperparameters and carry on
            self.refit_failures += 1
            return
        self.kernel = RbfKernelParams(hp.lengthscale, self.signal_variance)
        if mode == "joint" and hp.bandwidth is not None:
            self.noise = replace(self.noise, bandwidth=hp.bandwidth)

    def posterior(self, dataset: DuelDataset, rng: np.random.Generator):
        if self.backend == "hb" and dataset.m >= 1:
            vv = duel_covariance(dataset, self.kernel, self.noise)
            h = gibbs_hallucinate(vv, self.gibbs_burn_in, rng)
            return HbPosterior(dataset, self.kernel, self.noise, h)
        fit = fit_map(dataset, self.kernel, self.noise)
        return LaplacePosterior(dataset, self.kernel, self.noise, fit)

    def propose(self, dataset, prev_winner, rng):
        post = self.posterior(dataset, rng)
        history = dataset.endpoints_in_query_order()
        if history.shape[0] == 0:
            history = np.atleast_2d(prev_winner)
        return post, propose_duel(
            post, self.noise, prev_winner, self.domain, self.acq_cfg, rng,
            history=history,
        )


def _initial_bandwidth(anchors: np.ndarray, domain) -> float:
    if anchors.shape[0] >= 2:
        try:
            return loo_bandwidth(anchors)
        except ValueError:
            pass
    return 0.1 * domain.diameter


def run_trial(cfg: ExperimentConfig, seed: int) -> ExperimentTrace:
    """One seeded optimization trial; deterministic given (cfg, seed).

    Anchor and initial-duel streams depend only on the seed, so every
    acquisition variant sees identical starting data under a shared seed.
    """
    spec = cfg.spec()
    domain = spec.domain
    rng_anchor = np.random.default_rng([seed, 1])
    rng_init = np.random.default_rng([seed, 2])
    rng_loop = np.random.default_rng([seed, 3])

    trace = ExperimentTrace(seed=seed, metadata=cfg.to_mapping())
    trace.metadata["resolved.oracle_center"] = list(spec.oracle.center)
    trace.metadata["resolved.oracle_spread"] = list(spec.oracle.spread)
    trace.metadata["resolved.a"] = spec.scale

    try:
        anchors = sample_anchors(spec, cfg.n_anchors, rng_anchor)
        bandwidth = _initial_bandwidth(anchors, domain)
        noise_model = AnchorModel(anchors, bandwidth, spec.scale)
        trace.metadata["resolved.bandwidth_initial"] = bandwidth

        human_init = SimulatedHuman(spec, rng_init)
        dataset = DuelDataset(dim=domain.dim)
        for _ in range(cfg.n_initial_duels):
            pair = domain.uniform(2, rng_init)
            dataset.append(human_init.answer(pair[0], pair[1]))

        engine = _Engine(
            domain, noise_model, cfg.acq(), backend=cfg.backend,
            gibbs_burn_in=cfg.gibbs_burn_in, bandwidth_mode=cfg.bandwidth_mode,
            signal_variance=cfg.signal_variance,
            lengthscale_grid=cfg.lengthscale_grid,
        )
        human = SimulatedHuman(spec, rng_loop)

        engine.refit(dataset)
        # first reference point: the initial winner ranked best by the
        # current posterior mean
        post = engine.posterior(dataset, rng_loop)
        init_winners = np.array([r.winner for r in dataset.records])
        if init_winners.shape[0]:
            prev_winner, _ = incumbent(post, init_winners)
        else:
            prev_winner = domain.uniform(1, rng_loop)[0]

        mv_opt = {
            rho: mv_objective(spec.x_max, spec, rho) for rho in cfg.rho_values
        }
        cum = 0.0
        for t in range(1, cfg.iterations + 1):
            t0 = time.perf_counter()
            if (t - 1) % cfg.refit_every == 0:
                engine.refit(dataset)
            post, proposal = engine.propose(dataset, prev_winner, rng_loop)
            record = human.answer(proposal.challenger, proposal.reference)
            x_t = proposal.challenger
            f_t = spec.f(x_t)
            s2_true = true_noise_variance(spec, x_t)
            s2_hat = noise_variance(x_t, engine.noise)
            mv = {rho: f_t - rho * s2_true for rho in cfg.rho_values}
            simple = spec.f_max - f_t
            cum += simple
            wall = (time.perf_counter() - t0) * 1e3
            trace.rows.append(
                TraceRow(
                    iteration=t, challenger=x_t, winner=record.winner,
                    f_value=f_t, sigma2_true=s2_true, sigma2_hat=s2_hat,
                    mv=mv, simple_regret=simple, cum_regret=cum, wall_ms=wall,
                )
            )
            dataset.append(record)
            prev_winner = record.winner
        trace.metadata["resolved.mv_opt"] = {
            str(rho): mv_opt[rho] for rho in cfg.rho_values
        }
        trace.metadata["resolved.refit_failures"] = engine.refit_failures
    except Exception as err:  # noqa: BLE001 - partial trace must carry reason
        trace.aborted = True
        trace.abort_reason = f"{type(err).__name__}: {err}"
    return trace


def trace_to_csv(trace: ExperimentTrace, rho_values, dim: int) -> str:
    cols = ["iteration"]
    cols += [f"x_{i + 1}" for i in range(dim)]
    cols += ["f", "sigma2_true", "sigma2_hat"]
    cols += [f"mv_rho{_fmt_rho(r)}" for r in rho_values]
    cols += ["simple_regret", "cum_regret", "wall_ms"]
    lines = [",".join(cols)]
    for row in trace.rows:
        vals = [str(row.iteration)]
        vals += [repr(float(v)) for v in row.challenger]
        vals += [repr(float(row.f_value)), repr(float(row.sigma2_true)),
                 repr(float(row.sigma2_hat))]
        vals += [repr(float(row.mv[r])) for r in rho_values]
        vals += [repr(float(row.simple_regret)), repr(float(row.cum_regret)),
                 repr(float(row.wall_ms))]
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def _fmt_rho(rho: float) -> str:
    return f"{rho:g}"


def write_trace(path, trace: ExperimentTrace, rho_values, dim: int) -> None:
    Path(path).write_text(trace_to_csv(trace, rho_values, dim))


def read_trace_csv(path):
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    data = np.array(
        [[float(v) for v in line.split(",")] for line in lines[1:]]
    ) if len(lines) > 1 else np.zeros((0, len(header)))
    return header, data


def _trial_worker(args):
    cfg, seed = args
    return run_trial(cfg, seed)


def run_suite(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Run every configured seed, write per-seed traces plus aggregates.

    Raises if more than 20% of trials abort.
    """
    if len(cfg.seeds) < 2:
        raise ValueError("a suite needs at least 2 seeds")
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = cfg.spec()
    dim = spec.domain.dim

    jobs = [(cfg, seed) for seed in cfg.seeds]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            traces = list(pool.map(_trial_worker, jobs))
    else:
        traces = [run_trial(cfg, seed) for seed in cfg.seeds]

    aborted = [t for t in traces if t.aborted]
    if len(aborted) > 0.2 * len(traces):
        reasons = "; ".join(t.abort_reason for t in aborted[:3])
        raise SuiteError(
            f"{len(aborted)}/{len(traces)} trials aborted: {reasons}"
        )

    for t in traces:
        write_trace(out / f"trace_seed{t.seed}.csv", t, cfg.rho_values, dim)

    summary = aggregate_traces(traces, cfg, spec)
    (out / "aggregate.csv").write_text(summary.pop("aggregate_csv"))
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    try:
        first_anchors = sample_anchors(
            spec, cfg.n_anchors, np.random.default_rng([cfg.seeds[0], 1])
        )
        save_points(
            out / f"anchors_seed{cfg.seeds[0]}.txt", first_anchors,
            header=f"anchors of seed {cfg.seeds[0]} ({cfg.benchmark})",
        )
    except RuntimeError:
        pass  # that seed aborted during sampling; traces already flag it
    return summary


def aggregate_traces(traces, cfg: ExperimentConfig, spec: BenchmarkSpec) -> dict:
    """Mean/sd per iteration of regrets and their risk-averse variants."""
    ok = [t for t in traces if not t.aborted]
    T = cfg.iterations
    mv_opt = {rho: mv_objective(spec.x_max, spec, rho) for rho in cfg.rho_values}

    metrics = {}
    for rho in cfg.rho_values:
        sr = np.array(
            [[mv_opt[rho] - row.mv[rho] for row in t.rows] for t in ok]
        )
        metrics[f"simple_regret_rho{_fmt_rho(rho)}"] = sr
        metrics[f"cum_regret_rho{_fmt_rho(rho)}"] = np.cumsum(sr, axis=1)
    metrics["sigma2_true"] = np.array(
        [[row.sigma2_true for row in t.rows] for t in ok]
    )
    metrics["f"] = np.array([[row.f_value for row in t.rows] for t in ok])
    metrics["best_f"] = np.maximum.accumulate(metrics["f"], axis=1)

    cols = ["iteration"]
    for name in metrics:
        cols += [f"{name}_mean", f"{name}_sd"]
    lines = [",".join(cols)]
    for t_idx in range(T):
        vals = [str(t_idx + 1)]
        for name, arr in metrics.items():
            vals.append(repr(float(arr[:, t_idx].mean())))
            vals.append(repr(float(arr[:, t_idx].std())))
        lines.append(",".join(vals))

    summary = {
        "config": {k: v for k, v in cfg.to_mapping().items()},
        "defaults_recorded": {
            "initial_duels": cfg.n_initial_duels,
            "refit_every": cfg.refit_every,
            "gibbs_burn_in": cfg.gibbs_burn_in,
            "oracle_center": list(spec.oracle.center),
            "oracle_spread": list(spec.oracle.spread),
        },
        "n_seeds": len(traces),
        "n_aborted": len(traces) - len(ok),
        "mv_optimum": {str(r): mv_opt[r] for r in cfg.rho_values},
        "final": {
            name: {
                "mean": float(arr[:, -1].mean()),
                "sd": float(arr[:, -1].std()),
                "per_seed": [float(v) for v in arr[:, -1]],
            }
            for name, arr in metrics.items()
        },
        "per_seed_order": [t.seed for t in ok],
        "aggregate_csv": "\n".join(lines) + "\n",
    }
    return summary


def aggregate_directory(directory) -> dict:
    """Recompute mean/sd curves from per-seed trace CSVs on disk."""
    directory = Path(directory)
    files = sorted(directory.glob("trace_seed*.csv"))
    if not files:
        raise FileNotFoundError(f"no trace CSVs under {directory}")
    header, first = read_trace_csv(files[0])
    stacks = [first]
    for f in files[1:]:
        h2, data = read_trace_csv(f)
        if h2 != header:
            raise ValueError(f"{f} has a different schema")
        stacks.append(data)
    cube = np.stack(stacks)  # (seeds, T, cols)
    out_cols = ["iteration"]
    means = [cube[0, :, 0]]
    for j, name in enumerate(header[1:], start=1):
        out_cols += [f"{name}_mean", f"{name}_sd"]
        means.append(cube[:, :, j].mean(axis=0))
        means.append(cube[:, :, j].std(axis=0))
    lines = [",".join(out_cols)]
    for t in range(cube.shape[1]):
        lines.append(",".join(repr(float(col[t])) for col in means))
    text = "\n".join(lines) + "\n"
    (directory / "aggregate_recomputed.csv").write_text(text)
    return {"files": [str(f) for f in files], "rows": cube.shape[1]}
