"""Posterior prediction backends.

The Hallucination Believer draws a realization of the (always-negative) duel
differences from the truncated joint Gaussian by Gibbs sampling and then
conditions the GP on it exactly; the Laplace predictive is the fallback
backend built from the MAP fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    PsdMatrix,
    RbfKernelParams,
    SaturationCounter,
    kernel_matrix,
    sample_truncated_normal_below_zero,
)
from .prefmodel import DuelDataset, LaplaceFit, endpoint_std

__all__ = [
    "JointCovariance",
    "HallucinationSample",
    "PredictiveGaussian",
    "duel_covariance",
    "build_joint",
    "gibbs_hallucinate",
    "gibbs_chain",
    "hb_predict",
    "laplace_predict",
    "HbPosterior",
    "LaplacePosterior",
]


def duel_covariance(
    dataset: DuelDataset, kernel: RbfKernelParams, noise
) -> np.ndarray:
    """Covariance of the duel differences: GP variance of loser-minus-winner
    plus both endpoint noise variances on the diagonal."""
    m = dataset.m
    X = dataset.X
    W, Lo = X[:m], X[m:]
    K_ww = kernel_matrix(W, W, kernel)
    K_wl = kernel_matrix(W, Lo, kernel)
    K_ll = kernel_matrix(Lo, Lo, kernel)
    var = noise.variance(X)
    v_v = K_ww - K_wl - K_wl.T + K_ll + np.diag(var[:m] + var[m:])
    return 0.5 * (v_v + v_v.T)


@dataclass(frozen=True)
class JointCovariance:
    """Joint covariance of (f at test points, duel differences v)."""

    test_test: np.ndarray
    test_v: np.ndarray
    v_v: np.ndarray
    noise_test: np.ndarray

    @property
    def t(self) -> int:
        return self.test_test.shape[0]

    @property
    def m(self) -> int:
        return self.v_v.shape[0]

    def full(self) -> np.ndarray:
        return np.block([[self.test_test, self.test_v],
                         [self.test_v.T, self.v_v]])


def build_joint(
    X_star: np.ndarray,
    dataset: DuelDataset,
    kernel: RbfKernelParams,
    noise,
) -> JointCovariance:
    """Assemble the blocks of A (L + B) A^T for test points and duels.

    Each duel contributes the row -winner +loser, so the cross block is
    K(test, losers) - K(test, winners) and the duel block adds both endpoint
    noise variances on its diagonal.
    """
    X_star = np.atleast_2d(np.asarray(X_star, dtype=float))
    m = dataset.m
    if X_star.shape[0] < 1:
        raise ValueError("need at least one test point")
    if m < 1:
        raise ValueError("need at least one duel")
    X = dataset.X
    W, Lo = X[:m], X[m:]
    K_ss = kernel_matrix(X_star, X_star, kernel)
    K_sw = kernel_matrix(X_star, W, kernel)
    K_sl = kernel_matrix(X_star, Lo, kernel)
    return JointCovariance(
        test_test=K_ss,
        test_v=K_sl - K_sw,
        v_v=duel_covariance(dataset, kernel, noise),
        noise_test=noise.variance(X_star),
    )


@dataclass(frozen=True)
class HallucinationSample:
    """One Gibbs draw of the duel differences, every entry strictly negative."""

    values: np.ndarray
    burn_in: int
    thinning: int = 1

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.size and not np.all(values < 0):
            raise ValueError("hallucination entries must be strictly negative")


def _gibbs_sweep(v, precision, diag_var, rng, counter):
    for j in range(v.size):
        cond_mean = v[j] - (precision[j] @ v) * diag_var[j]
        v[j] = sample_truncated_normal_below_zero(
            cond_mean, diag_var[j], rng, counter
        )
    return v


def gibbs_hallucinate(
    sigma_vv: np.ndarray,
    burn_in: int,
    rng: np.random.Generator,
    counter: SaturationCounter | None = None,
) -> HallucinationSample:
    """Gibbs sampling of the zero-mean MVN N(0, sigma_vv) truncated below 0.

    Coordinates are cycled with the textbook full conditional (mean
    v_j - [P v]_j / P_jj, variance 1 / P_jj for precision P); the state after
    burn_in sweeps is returned.
    """
    psd = PsdMatrix.factor(np.asarray(sigma_vv, dtype=float))
    precision = psd.inv()
    diag_var = 1.0 / np.diag(precision)
    v = -np.sqrt(np.diag(psd.matrix)).astype(float)
    for _ in range(max(burn_in, 1)):
        v = _gibbs_sweep(v, precision, diag_var, rng, counter)
    return HallucinationSample(values=v.copy(), burn_in=burn_in)


def gibbs_chain(
    sigma_vv: np.ndarray,
    n_samples: int,
    burn_in: int,
    rng: np.random.Generator,
    thinning: int = 1,
) -> np.ndarray:
    """Kept states of the truncated-MVN chain, for diagnostics and tests."""
    psd = PsdMatrix.factor(np.asarray(sigma_vv, dtype=float))
    precision = psd.inv()
    diag_var = 1.0 / np.diag(precision)
    v = -np.sqrt(np.diag(psd.matrix)).astype(float)
    for _ in range(burn_in):
        v = _gibbs_sweep(v, precision, diag_var, rng, None)
    out = np.empty((n_samples, v.size))
    for i in range(n_samples):
        for _ in range(thinning):
            v = _gibbs_sweep(v, precision, diag_var, rng, None)
        out[i] = v
    return out


@dataclass(frozen=True)
class PredictiveGaussian:
    """Gaussian over latent values at test points (covariance symmetrized)."""

    mean: np.ndarray
    cov: np.ndarray

    def variances(self) -> np.ndarray:
        return np.clip(np.diag(self.cov), 0.0, None)

    def psd(self) -> PsdMatrix:
        return PsdMatrix.factor(self.cov)


def hb_predict(
    X_star: np.ndarray,
    dataset: DuelDataset,
    kernel: RbfKernelParams,
    noise,
    hallucination: HallucinationSample,
    noise_mode: str = "latent",
) -> PredictiveGaussian:
    """Exact Gaussian conditional on the hallucinated duel differences.

    noise_mode "latent" returns the posterior of f itself; "observed" adds the
    aleatoric noise variance of each test point to the predictive covariance.
    """
    if noise_mode not in ("latent", "observed"):
        raise ValueError(f"unknown noise_mode {noise_mode!r}")
    joint = build_joint(X_star, dataset, kernel, noise)
    v = hallucination.values
    if v.shape != (joint.m,):
        raise ValueError("hallucination size does not match duel count")
    vv = PsdMatrix.factor(joint.v_v)
    mean = joint.test_v @ vv.solve(v)
    cov = joint.test_test - joint.test_v @ vv.solve(joint.test_v.T)
    if noise_mode == "observed":
        cov = cov + np.diag(joint.noise_test)
    cov = 0.5 * (cov + cov.T)
    return PredictiveGaussian(mean=mean, cov=cov)


def laplace_predict(
    X_star: np.ndarray,
    fit: LaplaceFit,
    dataset: DuelDataset,
    kernel: RbfKernelParams,
    noise,
    noise_mode: str = "latent",
) -> PredictiveGaussian:
    """GP-classification style predictive from the MAP fit.

    Mean is K(test, X) alpha with f_map = L alpha; covariance uses the
    symmetric capacitance form K** - G^T (I + R L R^T)^{-1} G, which never
    inverts the Gram matrix and cannot exceed the prior variance.
    """
    if not fit.converged:
        raise ValueError("laplace_predict requires a converged fit")
    X_star = np.atleast_2d(np.asarray(X_star, dtype=float))
    m = dataset.m
    K_ss = kernel_matrix(X_star, X_star, kernel)
    if m == 0:
        cov = 0.5 * (K_ss + K_ss.T)
        return PredictiveGaussian(mean=np.zeros(X_star.shape[0]), cov=cov)
    X = dataset.X
    K_sX = kernel_matrix(X_star, X, kernel)
    if fit.alpha is not None:
        mean = K_sX @ fit.alpha
    else:
        gram = PsdMatrix.factor(kernel_matrix(X, X, kernel))
        mean = K_sX @ gram.solve(fit.f_map)
    s = endpoint_std(dataset, noise)
    f = fit.f_map
    from .core import normal_pdf_cdf_ratio

    z = (f[:m] - f[m:]) / s
    ratio = normal_pdf_cdf_ratio(z)
    lam = ratio * (ratio + z) / (s * s)
    rd = np.sqrt(lam)
    L = kernel_matrix(X, X, kernel)
    LU = L[:, :m] - L[:, m:]
    C = np.eye(m) + rd[:, None] * (LU[:m] - LU[m:]) * rd[None, :]
    G = rd[:, None] * (K_sX[:, :m] - K_sX[:, m:]).T
    cov = K_ss - G.T @ PsdMatrix.factor(C).solve(G)
    if noise_mode == "observed":
        cov = cov + np.diag(noise.variance(X_star))
    cov = 0.5 * (cov + cov.T)
    return PredictiveGaussian(mean=mean, cov=cov)


class HbPosterior:
    """Fast pointwise mean/variance of the HB predictive for acquisition."""

    def __init__(self, dataset, kernel, noise, hallucination,
                 noise_mode: str = "latent"):
        self.dataset = dataset
        self.kernel = kernel
        self.noise = noise
        self.noise_mode = noise_mode
        self.hallucination = hallucination
        m = dataset.m
        if m == 0:
            self._empty = True
            return
        self._empty = False
        self._vv = PsdMatrix.factor(duel_covariance(dataset, kernel, noise))
        self._w = self._vv.solve(hallucination.values)

    def mean_var(self, X_q: np.ndarray):
        X_q = np.atleast_2d(np.asarray(X_q, dtype=float))
        prior = self.kernel.signal_variance * np.ones(X_q.shape[0])
        if self._empty:
            mean = np.zeros(X_q.shape[0])
            var = prior
        else:
            m = self.dataset.m
            X = self.dataset.X
            K_qw = kernel_matrix(X_q, X[:m], self.kernel)
            K_ql = kernel_matrix(X_q, X[m:], self.kernel)
            S_qv = K_ql - K_qw
            mean = S_qv @ self._w
            var = prior - np.sum(S_qv * self._vv.solve(S_qv.T).T, axis=1)
            np.clip(var, 0.0, None, out=var)
        if self.noise_mode == "observed":
            var = var + self.noise.variance(X_q)
        return mean, var


class LaplacePosterior:
    """Pointwise mean/variance from the Laplace fit."""

    def __init__(self, dataset, kernel, noise, fit: LaplaceFit,
                 noise_mode: str = "latent"):
        self.dataset = dataset
        self.kernel = kernel
        self.noise = noise
        self.noise_mode = noise_mode
        self.fit = fit
        m = dataset.m
        if m == 0:
            self._empty = True
            return
        self._empty = False
        s = endpoint_std(dataset, noise)
        f = fit.f_map
        from .core import normal_pdf_cdf_ratio

        z = (f[:m] - f[m:]) / s
        ratio = normal_pdf_cdf_ratio(z)
        lam = ratio * (ratio + z) / (s * s)
        self._rd = np.sqrt(lam)
        X = dataset.X
        L = kernel_matrix(X, X, kernel)
        LU = L[:, :m] - L[:, m:]
        C = np.eye(m) + self._rd[:, None] * (LU[:m] - LU[m:]) * self._rd[None, :]
        self._C = PsdMatrix.factor(C)
        gram = PsdMatrix.factor(L)
        self._alpha = fit.alpha if fit.alpha is not None else gram.solve(fit.f_map)

    def mean_var(self, X_q: np.ndarray):
        X_q = np.atleast_2d(np.asarray(X_q, dtype=float))
        prior = self.kernel.signal_variance * np.ones(X_q.shape[0])
        if self._empty:
            mean = np.zeros(X_q.shape[0])
            var = prior
        else:
            m = self.dataset.m
            K_qX = kernel_matrix(X_q, self.dataset.X, self.kernel)
            mean = K_qX @ self._alpha
            G = self._rd[:, None] * (K_qX[:, :m] - K_qX[:, m:]).T
            var = prior - np.sum(G * self._C.solve(G), axis=0)
            np.clip(var, 0.0, None, out=var)
        if self.noise_mode == "observed":
            var = var + self.noise.variance(X_q)
        return mean, var
