"""Deterministic numerical kernel shared by every other module.

Covariance functions, PSD linear algebra with jitter escalation, stable
Gaussian pdf/cdf helpers and truncated-normal sampling. All randomness comes
from injected numpy Generators; nothing here touches global RNG state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import log_ndtr, ndtr, ndtri_exp

__all__ = [
    "BoxDomain",
    "RbfKernelParams",
    "PsdMatrix",
    "NotPositiveDefiniteError",
    "SaturationCounter",
    "rbf_kernel",
    "kernel_matrix",
    "cholesky_solve",
    "std_normal_pdf",
    "std_normal_cdf",
    "log_std_normal_cdf",
    "normal_pdf_cdf_ratio",
    "sample_truncated_normal_below_zero",
]

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)

# Underflow threshold for the truncated sampler: Phi(-mean/sigma) below this
# saturates instead of producing garbage quantiles.
_TRUNC_UNDERFLOW_LOG = np.log(1e-300)


class NotPositiveDefiniteError(ValueError):
    """Cholesky failed even after the maximum jitter was added."""

    def __init__(self, message: str, jitter: float):
        super().__init__(message)
        self.jitter = jitter


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box in R^d; the search space for designs and anchors."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size < 1:
            raise ValueError("domain bounds must be 1-d arrays of equal length >= 1")
        if not (np.isfinite(lower).all() and np.isfinite(upper).all()):
            raise ValueError("domain bounds must be finite")
        if not np.all(lower < upper):
            raise ValueError("each lower bound must be strictly below its upper bound")

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def contains(self, x: np.ndarray, atol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(
            np.all(x >= self.lower - atol) and np.all(x <= self.upper + atol)
        )

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def uniform(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.lower + (self.upper - self.lower) * rng.random((n, self.dim))


@dataclass(frozen=True)
class RbfKernelParams:
    """Squared-exponential kernel hyperparameters (scalar lengthscale)."""

    lengthscale: float
    signal_variance: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.lengthscale) and self.lengthscale > 0):
            raise ValueError("lengthscale must be positive and finite")
        if not (np.isfinite(self.signal_variance) and self.signal_variance > 0):
            raise ValueError("signal_variance must be positive and finite")


def rbf_kernel(x: np.ndarray, y: np.ndarray, params: RbfKernelParams) -> float:
    """Squared-exponential covariance between two points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("kernel inputs must be finite")
    sq = float(np.sum((x - y) ** 2))
    return params.signal_variance * float(np.exp(-sq / (2.0 * params.lengthscale**2)))


def kernel_matrix(
    X: np.ndarray, Y: np.ndarray, params: RbfKernelParams
) -> np.ndarray:
    """Gram matrix k(X, Y) for row-stacked point sets."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise ValueError("point sets differ in dimension")
    sq = (
        np.sum(X**2, axis=1)[:, None]
        + np.sum(Y**2, axis=1)[None, :]
        - 2.0 * X @ Y.T
    )
    np.maximum(sq, 0.0, out=sq)
    return params.signal_variance * np.exp(-sq / (2.0 * params.lengthscale**2))


@dataclass
class PsdMatrix:
    """Symmetric PSD matrix with a cached Cholesky factor and the jitter used.

    Jitter escalates geometrically from 1e-10 to 1e-4 in units of the mean
    diagonal (trace/n), so all callers share one numerical policy.
    """

    matrix: np.ndarray
    chol: np.ndarray = field(repr=False)
    jitter: float

    SYMMETRY_RTOL = 1e-10
    JITTER_START = 1e-10
    JITTER_MAX = 1e-4

    @classmethod
    def factor(cls, matrix: np.ndarray) -> "PsdMatrix":
        A = np.asarray(matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("matrix must be square")
        n = A.shape[0]
        if n == 0:
            return cls(matrix=A.copy(), chol=A.copy(), jitter=0.0)
        scale = max(np.abs(A).max(), 1.0)
        if np.abs(A - A.T).max() > cls.SYMMETRY_RTOL * scale:
            raise ValueError("matrix is not symmetric to 1e-10 relative")
        A = 0.5 * (A + A.T)
        unit = max(float(np.trace(A)) / n, np.finfo(float).tiny)
        jitter = 0.0
        while True:
            try:
                chol = np.linalg.cholesky(A + jitter * np.eye(n))
                return cls(matrix=A, chol=chol, jitter=jitter)
            except np.linalg.LinAlgError:
                if jitter == 0.0:
                    jitter = cls.JITTER_START * unit
                elif jitter >= cls.JITTER_MAX * unit:
                    raise NotPositiveDefiniteError(
                        f"matrix not PSD after jitter {jitter:.3e}", jitter
                    ) from None
                else:
                    jitter = min(jitter * 10.0, cls.JITTER_MAX * unit)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if self.n == 0:
            return np.zeros_like(b)
        return cho_solve((self.chol, True), b)

    def inv(self) -> np.ndarray:
        return self.solve(np.eye(self.n))

    def logdet(self) -> float:
        if self.n == 0:
            return 0.0
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))


def cholesky_solve(K, b: np.ndarray) -> np.ndarray:
    """Solve K z = b for symmetric PSD K with the shared jitter policy."""
    psd = K if isinstance(K, PsdMatrix) else PsdMatrix.factor(K)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != psd.n:
        raise ValueError("right-hand side not conformable")
    return psd.solve(b)


def std_normal_pdf(z):
    z = np.asarray(z, dtype=float)
    out = np.exp(-0.5 * z * z - _LOG_SQRT_2PI)
    return float(out) if out.ndim == 0 else out


def std_normal_cdf(z):
    z = np.asarray(z, dtype=float)
    out = ndtr(z)
    return float(out) if out.ndim == 0 else out


def log_std_normal_cdf(z):
    """log Phi(z) through the stable erfc route; finite for very negative z."""
    z = np.asarray(z, dtype=float)
    out = log_ndtr(z)
    return float(out) if out.ndim == 0 else out


def normal_pdf_cdf_ratio(z):
    """phi(z)/Phi(z), computed in the log domain so z << 0 stays accurate."""
    z = np.asarray(z, dtype=float)
    out = np.exp(-0.5 * z * z - _LOG_SQRT_2PI - log_ndtr(z))
    return float(out) if out.ndim == 0 else out


@dataclass
class SaturationCounter:
    """Counts truncated-sampler invocations that hit CDF underflow."""

    count: int = 0

    def bump(self):
        self.count += 1


def sample_truncated_normal_below_zero(
    mean: float,
    variance: float,
    rng: np.random.Generator,
    counter: SaturationCounter | None = None,
) -> float:
    """Draw from N(mean, variance) conditioned on the value being < 0.

    Inverse-CDF transform: deterministic cost and bit-reproducible under a
    seeded generator. If the truncation probability underflows (< 1e-300) the
    draw saturates to a tiny negative value and the counter is bumped.
    """
    if not variance > 0:
        raise ValueError("variance must be positive")
    sigma = np.sqrt(variance)
    log_p0 = log_ndtr(-mean / sigma)
    if log_p0 < _TRUNC_UNDERFLOW_LOG:
        if counter is not None:
            counter.bump()
        return -1e-12
    u = rng.random()
    # quantile of u * Phi(-mean/sigma), evaluated from its logarithm
    value = mean + sigma * ndtri_exp(np.log(u) + log_p0)
    if not value < 0.0:
        # roundoff at the boundary; clamp just below zero
        value = -abs(value) - 1e-300 if value == 0.0 else -abs(value)
    return float(value)
