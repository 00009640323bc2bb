"""Risk-neutral and risk-averse acquisition over the duel surrogate.

EI/UCB ignore the human's judgment difficulty; their risk-averse versions
subtract a penalty built from the estimated aleatoric noise at the candidate.
Duel proposal pairs the acquisition argmax with the previous winner.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .core import BoxDomain, std_normal_cdf, std_normal_pdf

__all__ = [
    "AcqConfig",
    "DuelProposal",
    "expected_improvement",
    "acq_values",
    "acq_value",
    "incumbent",
    "sobol_pool",
    "propose_duel",
]

KINDS = ("ei", "ucb", "anpei", "rahbo")


@dataclass(frozen=True)
class AcqConfig:
    kind: str = "anpei"
    gamma: float = 1.0
    eta: float = 2.0
    pool_per_dim: int = 1024
    refine_top: int = 8
    refine_steps: int = 50

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown acquisition kind {self.kind!r}")
        if not (np.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError("gamma must be finite and >= 0")
        if not (np.isfinite(self.eta) and self.eta >= 0):
            raise ValueError("eta must be finite and >= 0")
        if self.pool_per_dim < 1 or self.refine_top < 1:
            raise ValueError("candidate budget must be >= 1")


@dataclass(frozen=True)
class DuelProposal:
    challenger: np.ndarray
    reference: np.ndarray
    acq_value: float
    pool_best_value: float


def expected_improvement(mu, sd, incumbent_mean):
    """Closed-form Gaussian EI toward maximization; sd == 0 degrades to the
    positive-part improvement."""
    mu = np.asarray(mu, dtype=float)
    sd = np.asarray(sd, dtype=float)
    diff = mu - incumbent_mean
    plus = np.where(diff > 0, diff, 0.0)
    pos = sd > 0
    if np.any(pos):
        z = np.where(pos, diff / np.where(pos, sd, 1.0), 0.0)
        # |z| > 40 saturates the closed form to its asymptote before the
        # z * Phi(z) product can turn into inf * 0
        zc = np.clip(z, -40.0, 40.0)
        ei = sd * (zc * std_normal_cdf(zc) + std_normal_pdf(zc))
        ei = np.where(z > 40.0, plus, np.where(z < -40.0, 0.0, ei))
        out = np.where(pos, ei, plus)
    else:
        out = plus
    return out


def acq_values(mu, sd, noise_var, incumbent_mean, cfg: AcqConfig):
    """Vectorized acquisition at candidates with posterior (mu, sd) and
    estimated noise variance noise_var."""
    mu = np.asarray(mu, dtype=float)
    sd = np.asarray(sd, dtype=float)
    noise_var = np.asarray(noise_var, dtype=float)
    if cfg.kind == "ei":
        return expected_improvement(mu, sd, incumbent_mean)
    if cfg.kind == "anpei":
        return expected_improvement(mu, sd, incumbent_mean) - cfg.gamma * np.sqrt(
            noise_var
        )
    if cfg.kind == "ucb":
        return mu + cfg.eta * sd
    return mu + cfg.eta * sd - cfg.gamma * noise_var  # rahbo


def acq_value(x, posterior, noise, incumbent_mean, cfg: AcqConfig) -> float:
    """Acquisition at a single point."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    mu, var = posterior.mean_var(x)
    nv = noise.variance(x)
    return float(acq_values(mu, np.sqrt(var), nv, incumbent_mean, cfg)[0])


def incumbent(posterior, history: np.ndarray):
    """Queried point with the highest posterior mean; ties go to the earliest."""
    history = np.atleast_2d(np.asarray(history, dtype=float))
    if history.shape[0] == 0:
        raise ValueError("incumbent needs at least one queried point")
    mu, _ = posterior.mean_var(history)
    best = int(np.argmax(mu))  # argmax returns the first maximal index
    return history[best], float(mu[best])


def sobol_pool(domain: BoxDomain, n: int, rng: np.random.Generator) -> np.ndarray:
    """Scrambled Sobol candidates in the domain (n rounded up to 2^k)."""
    n_pow2 = 1 << max(int(np.ceil(np.log2(max(n, 1)))), 0)
    sampler = qmc.Sobol(d=domain.dim, scramble=True, seed=rng)
    u = sampler.random(n_pow2)[:n]
    return domain.lower + (domain.upper - domain.lower) * u


def propose_duel(
    posterior,
    noise,
    previous_winner: np.ndarray,
    domain: BoxDomain,
    cfg: AcqConfig,
    rng: np.random.Generator,
    history: np.ndarray | None = None,
) -> DuelProposal:
    """Challenger = acquisition argmax over a Sobol pool plus coordinate
    refinement; reference = the previous winner.

    The pool is drawn first from rng, after which refinement only accepts
    improvements, so the returned value always dominates the pool.
    """
    previous_winner = np.atleast_1d(np.asarray(previous_winner, dtype=float))
    if history is None:
        history = previous_winner[None, :]
    x_inc, mu_inc = incumbent(posterior, history)

    def evaluate(X):
        mu, var = posterior.mean_var(X)
        return acq_values(mu, np.sqrt(var), noise.variance(X), mu_inc, cfg)

    pool = sobol_pool(domain, cfg.pool_per_dim * domain.dim, rng)
    vals = evaluate(pool)
    pool_best = float(np.max(vals))
    order = np.argsort(vals)[::-1]
    top = pool[order[: cfg.refine_top]].copy()
    top_vals = vals[order[: cfg.refine_top]].copy()

    span = domain.upper - domain.lower
    radius = 0.1
    for step in range(cfg.refine_steps):
        axis = step % domain.dim
        delta = radius * span[axis]
        for sign in (+1.0, -1.0):
            cand = top.copy()
            cand[:, axis] += sign * delta
            cand = np.clip(cand, domain.lower, domain.upper)
            cand_vals = evaluate(cand)
            better = cand_vals > top_vals
            top[better] = cand[better]
            top_vals[better] = cand_vals[better]
        radius *= 0.9

    best = int(np.argmax(top_vals))
    challenger, value = top[best], float(top_vals[best])
    if np.array_equal(challenger, previous_winner):
        # a duel needs two distinct designs; fall back through the pool
        for idx in order:
            if not np.array_equal(pool[idx], previous_winner):
                challenger, value = pool[idx], float(vals[idx])
                break
    return DuelProposal(
        challenger=challenger,
        reference=previous_winner,
        acq_value=value,
        pool_best_value=pool_best,
    )
