"""Heteroscedastic preferential Bayesian optimization with anchor-based noise.

A latent utility is learned from pairwise duels whose answer noise varies
over the input space; a kernel density estimate over user-supplied anchors
models that noise, and risk-averse acquisition functions trade utility
against it.
"""

from .acquisition import AcqConfig, DuelProposal, propose_duel
from .benchmarks import BenchmarkSpec, SimulatedHuman, make_benchmark
from .core import BoxDomain, RbfKernelParams
from .harness import ExperimentConfig, mv_objective, run_suite, run_trial
from .inference import gibbs_hallucinate, hb_predict, laplace_predict
from .noise import AnchorModel, TrueUncertaintyOracle, loo_bandwidth, rate_check
from .prefmodel import DuelDataset, DuelRecord, fit_hyperparams, fit_map, log_evidence

__all__ = [
    "AcqConfig",
    "AnchorModel",
    "BenchmarkSpec",
    "BoxDomain",
    "DuelDataset",
    "DuelProposal",
    "DuelRecord",
    "ExperimentConfig",
    "RbfKernelParams",
    "SimulatedHuman",
    "TrueUncertaintyOracle",
    "fit_hyperparams",
    "fit_map",
    "gibbs_hallucinate",
    "hb_predict",
    "laplace_predict",
    "log_evidence",
    "loo_bandwidth",
    "make_benchmark",
    "mv_objective",
    "propose_duel",
    "rate_check",
    "run_suite",
    "run_trial",
]

__version__ = "0.1.0"
