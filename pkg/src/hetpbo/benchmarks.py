"""Synthetic latent utilities and the simulated human that answers duels.

Sign convention is maximization throughout: Branin is negated, the
sine and the rescaled 4-d exponential-sum test function are used as written.
Each benchmark carries an analytic user-uncertainty oracle whose density
defines the true aleatoric noise variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BoxDomain
from .noise import TrueUncertaintyOracle
from .prefmodel import DuelRecord

__all__ = [
    "BenchmarkSpec",
    "SimulatedHuman",
    "BENCHMARK_NAMES",
    "make_benchmark",
    "latent_f",
    "true_noise_variance",
    "sample_anchors",
    "answer_duel",
]

BENCHMARK_NAMES = ("sine1d", "branin2d", "hartmann4d")

_HART_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_HART_A = np.array(
    [
        [10.0, 3.0, 17.0, 3.5],
        [0.05, 10.0, 17.0, 0.1],
        [3.0, 3.5, 1.7, 10.0],
        [17.0, 8.0, 0.05, 10.0],
    ]
)
_HART_P = 1e-4 * np.array(
    [
        [1312.0, 1696.0, 5569.0, 124.0],
        [2329.0, 4135.0, 8307.0, 3736.0],
        [2348.0, 1451.0, 3522.0, 2883.0],
        [4047.0, 8828.0, 8732.0, 5743.0],
    ]
)


def _sine(x: np.ndarray) -> float:
    return float(np.sin(2.0 * math.pi * x[0]))


def _branin_raw(x: np.ndarray) -> float:
    b = 5.1 / (4.0 * math.pi**2)
    c = 5.0 / math.pi
    t = 1.0 / (8.0 * math.pi)
    return float(
        (x[1] - b * x[0] ** 2 + c * x[0] - 6.0) ** 2
        + 10.0 * (1.0 - t) * math.cos(x[0])
        + 10.0
    )


def _hartmann4(x: np.ndarray) -> float:
    expo = (_HART_A * (x[None, :] - _HART_P)).sum(axis=1)
    return float((1.1 - (_HART_ALPHA * np.exp(-expo)).sum()) / 0.839)


@dataclass(frozen=True)
class BenchmarkSpec:
    name: str
    domain: BoxDomain
    x_max: np.ndarray
    f_max: float
    f_min: float
    oracle: TrueUncertaintyOracle
    scale: float

    def __post_init__(self):
        object.__setattr__(self, "x_max", np.atleast_1d(np.asarray(self.x_max, float)))
        if not self.domain.contains(self.x_max):
            raise ValueError("x_max must lie inside the domain")
        if self.oracle.dim != self.domain.dim:
            raise ValueError("oracle dimension mismatch")

    @property
    def value_range(self) -> float:
        return self.f_max - self.f_min

    def f(self, x: np.ndarray) -> float:
        return latent_f(self.name, x, self.domain)


_DEFAULTS = {
    # name: (lower, upper, x_max, f_max, f_min, default a, oracle center, oracle sd)
    "sine1d": (
        [0.0], [2.0], [0.25], 1.0, -1.0, 0.1, [0.25], [0.125],
    ),
    "branin2d": (
        [-5.0, 0.0], [10.0, 15.0], [math.pi, 2.275],
        -0.3978873577297384, -308.12909601160666, 1.0,
        [math.pi, 2.275], [1.5, 1.5],
    ),
    "hartmann4d": (
        [0.0] * 4, [1.0] * 4, [1.0] * 4,
        1.3108726154467704, -1538746417.7208066, 2.0,
        [0.3] * 4, [0.25] * 4,
    ),
}


def latent_f(name: str, x: np.ndarray, domain: BoxDomain | None = None) -> float:
    """Latent utility value; raises outside the benchmark domain."""
    if name not in BENCHMARK_NAMES:
        raise ValueError(f"unknown benchmark {name!r}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lower, upper, *_ = _DEFAULTS[name]
    domain = domain or BoxDomain(lower, upper)
    if x.size != domain.dim:
        raise ValueError("dimension mismatch")
    if not domain.contains(x):
        raise ValueError(f"{x} outside the {name} domain")
    if name == "sine1d":
        return _sine(x)
    if name == "branin2d":
        return -_branin_raw(x)
    return _hartmann4(x)


def make_benchmark(
    name: str,
    a: float | None = None,
    oracle_family: str = "gaussian",
    dof: float | None = None,
    oracle_center=None,
    oracle_spread=None,
) -> BenchmarkSpec:
    """Benchmark with its documented default oracle placement.

    The oracle sits on the optimum for sine and Branin and away from it for
    the 4-d function; centers and spreads can be overridden per experiment.
    """
    if name not in _DEFAULTS:
        raise ValueError(f"unknown benchmark {name!r}")
    lower, upper, x_max, f_max, f_min, a_def, center, spread = _DEFAULTS[name]
    scale = a_def if a is None else float(a)
    oracle = TrueUncertaintyOracle(
        family=oracle_family,
        center=center if oracle_center is None else oracle_center,
        spread=spread if oracle_spread is None else oracle_spread,
        scale=scale,
        dof=dof,
    )
    return BenchmarkSpec(
        name=name,
        domain=BoxDomain(lower, upper),
        x_max=x_max,
        f_max=f_max,
        f_min=f_min,
        oracle=oracle,
        scale=scale,
    )


def true_noise_variance(spec: BenchmarkSpec, x: np.ndarray) -> float:
    """Ground-truth aleatoric variance a * exp(-p(x)) from the oracle density."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not spec.domain.contains(x):
        raise ValueError("point outside the benchmark domain")
    return float(spec.oracle.variance(x[None, :])[0])


def sample_anchors(
    spec: BenchmarkSpec, n: int, rng: np.random.Generator
) -> np.ndarray:
    """n i.i.d. oracle draws, rejection-clipped to the domain."""
    if n < 1:
        raise ValueError("need n >= 1 anchors")
    out = np.empty((n, spec.domain.dim))
    got = 0
    drawn = 0
    while got < n:
        batch = spec.oracle.sample(max(n - got, 16), rng)
        drawn += batch.shape[0]
        inside = batch[
            np.all(batch >= spec.domain.lower, axis=1)
            & np.all(batch <= spec.domain.upper, axis=1)
        ]
        take = min(inside.shape[0], n - got)
        out[got : got + take] = inside[:take]
        got += take
        if drawn >= 100 * n and got < max(drawn // 100, 1):
            raise RuntimeError(
                "anchor rejection acceptance below 1%; oracle placed badly"
            )
    return out


@dataclass
class SimulatedHuman:
    """Answers duels by comparing noisy utilities under the true oracle."""

    spec: BenchmarkSpec
    rng: np.random.Generator

    def win_probability(self, x, y) -> float:
        """Closed-form probit probability that x beats y."""
        from .core import std_normal_cdf

        fx = self.spec.f(x)
        fy = self.spec.f(y)
        vx = true_noise_variance(self.spec, x)
        vy = true_noise_variance(self.spec, y)
        return float(std_normal_cdf((fx - fy) / math.sqrt(vx + vy)))

    def answer(self, x, y) -> DuelRecord:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        ux = self.spec.f(x) + self.rng.normal(
            0.0, math.sqrt(true_noise_variance(self.spec, x))
        )
        uy = self.spec.f(y) + self.rng.normal(
            0.0, math.sqrt(true_noise_variance(self.spec, y))
        )
        if ux >= uy:  # exact ties (probability zero) go to the first design
            return DuelRecord(winner=x, loser=y)
        return DuelRecord(winner=y, loser=x)


def answer_duel(human: SimulatedHuman, x, y) -> DuelRecord:
    return human.answer(x, y)
