"""Heteroscedastic preferential Gaussian process.

Probit duel likelihood normalized by the summed endpoint noise variances,
MAP estimation by damped Newton iterations, Laplace evidence, and evidence-
based hyperparameter selection (lengthscale alone or jointly with the KDE
bandwidth).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .core import (
    NotPositiveDefiniteError,
    PsdMatrix,
    RbfKernelParams,
    kernel_matrix,
    log_std_normal_cdf,
    normal_pdf_cdf_ratio,
)
from .noise import AnchorModel

__all__ = [
    "DuelRecord",
    "DuelDataset",
    "LaplaceFit",
    "SurrogateHyperparams",
    "LineSearchError",
    "duel_z",
    "neg_log_posterior",
    "grad_and_hessian",
    "fit_map",
    "log_evidence",
    "fit_hyperparams",
    "load_duels",
    "save_duels",
]


class LineSearchError(RuntimeError):
    pass


@dataclass(frozen=True)
class DuelRecord:
    """Ordered outcome of one pairwise comparison."""

    winner: np.ndarray
    loser: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.winner, dtype=float))
        l = np.atleast_1d(np.asarray(self.loser, dtype=float))
        object.__setattr__(self, "winner", w)
        object.__setattr__(self, "loser", l)
        if w.shape != l.shape:
            raise ValueError("winner and loser must share a dimension")
        if np.array_equal(w, l):
            raise ValueError("winner and loser coincide exactly")


class DuelDataset:
    """Ordered duel history with the stacked winners-then-losers matrix."""

    def __init__(self, records=(), dim: int | None = None):
        self._records: list[DuelRecord] = []
        self._dim = dim
        for r in records:
            self.append(r)

    def append(self, record: DuelRecord) -> None:
        if self._dim is None:
            self._dim = record.winner.size
        elif record.winner.size != self._dim:
            raise ValueError("duel dimension mismatch")
        self._records.append(record)

    def copy(self) -> "DuelDataset":
        return DuelDataset(self._records, dim=self._dim)

    @property
    def records(self) -> tuple[DuelRecord, ...]:
        return tuple(self._records)

    @property
    def m(self) -> int:
        return len(self._records)

    def __len__(self) -> int:
        return self.m

    @property
    def dim(self) -> int:
        if self._dim is None:
            raise ValueError("empty dataset has no dimension")
        return self._dim

    @property
    def X(self) -> np.ndarray:
        """Stacked endpoints, winners first: rows k and m+k belong to duel k."""
        if self.m == 0:
            return np.zeros((0, self._dim or 0))
        winners = np.stack([r.winner for r in self._records])
        losers = np.stack([r.loser for r in self._records])
        return np.vstack([winners, losers])

    def endpoints_in_query_order(self) -> np.ndarray:
        """Unique endpoints ordered by first appearance (winner then loser)."""
        seen: list[np.ndarray] = []
        for r in self._records:
            for p in (r.winner, r.loser):
                if not any(np.array_equal(p, q) for q in seen):
                    seen.append(p)
        return np.array(seen) if seen else np.zeros((0, self._dim or 0))


def endpoint_std(dataset: DuelDataset, noise) -> np.ndarray:
    """Per-duel sqrt of the summed winner/loser noise variances."""
    if dataset.m == 0:
        return np.zeros(0)
    v = noise.variance(dataset.X)
    return np.sqrt(v[: dataset.m] + v[dataset.m :])


def _z_values(f: np.ndarray, dataset: DuelDataset, noise) -> np.ndarray:
    m = dataset.m
    s = endpoint_std(dataset, noise)
    return (f[:m] - f[m:]) / s


def duel_z(k: int, f: np.ndarray, dataset: DuelDataset, noise) -> float:
    """Likelihood argument z_k of the k-th duel at latent values f."""
    if not 0 <= k < dataset.m:
        raise IndexError("duel index out of range")
    return float(_z_values(np.asarray(f, dtype=float), dataset, noise)[k])


def _gram(dataset: DuelDataset, kernel: RbfKernelParams) -> PsdMatrix:
    X = dataset.X
    return PsdMatrix.factor(kernel_matrix(X, X, kernel))


def neg_log_posterior(
    f: np.ndarray, dataset: DuelDataset, kernel: RbfKernelParams, noise,
    gram: PsdMatrix | None = None,
) -> float:
    """S(f): negative log duel likelihood plus the GP prior quadratic."""
    f = np.asarray(f, dtype=float)
    if f.shape != (2 * dataset.m,):
        raise ValueError("latent vector must have one entry per endpoint")
    if dataset.m == 0:
        return 0.0
    gram = gram or _gram(dataset, kernel)
    z = _z_values(f, dataset, noise)
    return float(-np.sum(log_std_normal_cdf(z)) + 0.5 * f @ gram.solve(f))


def grad_and_hessian(
    f: np.ndarray, dataset: DuelDataset, kernel: RbfKernelParams, noise,
    gram: PsdMatrix | None = None,
):
    """Gradient and Hessian of S(f).

    The likelihood block stacks -(phi/Phi)/s over winners against the mirrored
    positive loser block; the curvature is (phi/Phi)^2 + (phi/Phi) z scaled by
    1/s^2 with the +/- checkerboard across the winner/loser blocks.
    """
    f = np.asarray(f, dtype=float)
    m = dataset.m
    gram = gram or _gram(dataset, kernel)
    L_inv = gram.inv() if m else np.zeros((0, 0))
    if m == 0:
        return np.zeros(0), L_inv
    s = endpoint_std(dataset, noise)
    z = (f[:m] - f[m:]) / s
    ratio = normal_pdf_cdf_ratio(z)
    g_lik = np.concatenate([-ratio / s, ratio / s])
    w = ratio * (ratio + z)  # curvature of -log Phi at z, in (0, 1)
    lam = w / (s * s)
    Lam = np.zeros((2 * m, 2 * m))
    idx = np.arange(m)
    Lam[idx, idx] = lam
    Lam[m + idx, m + idx] = lam
    Lam[idx, m + idx] = -lam
    Lam[m + idx, idx] = -lam
    grad = g_lik + gram.solve(f)
    hess = Lam + L_inv
    return grad, hess


def _likelihood_curvature(f, dataset, noise) -> np.ndarray:
    m = dataset.m
    if m == 0:
        return np.zeros((0, 0))
    s = endpoint_std(dataset, noise)
    z = (f[:m] - f[m:]) / s
    ratio = normal_pdf_cdf_ratio(z)
    lam = ratio * (ratio + z) / (s * s)
    Lam = np.zeros((2 * m, 2 * m))
    idx = np.arange(m)
    Lam[idx, idx] = lam
    Lam[m + idx, m + idx] = lam
    Lam[idx, m + idx] = -lam
    Lam[m + idx, idx] = -lam
    return Lam


@dataclass(frozen=True)
class LaplaceFit:
    """MAP latent vector with the likelihood curvature at the optimum.

    alpha is the dual vector with f_map = L alpha; it lets downstream code
    evaluate prior terms without solving against an ill-conditioned Gram.
    """

    f_map: np.ndarray
    lambda_map: np.ndarray
    converged: bool
    grad_norm: float
    iterations: int
    alpha: np.ndarray = None
    s_map: float = np.nan


def _nll_terms(f, dataset, noise, s):
    m = dataset.m
    z = (f[:m] - f[m:]) / s
    nll = -float(np.sum(log_std_normal_cdf(z)))
    ratio = normal_pdf_cdf_ratio(z)
    grad = np.concatenate([-ratio / s, ratio / s])
    lam = ratio * (ratio + z) / (s * s)
    return nll, grad, lam


def fit_map(
    dataset: DuelDataset,
    kernel: RbfKernelParams,
    noise,
    tol: float = 1e-6,
    max_iter: int = 100,
) -> LaplaceFit:
    """Damped Newton minimization of S(f) from the prior mean.

    Runs in the dual parametrization f = L a with the m-by-m capacitance
    I + R L R^T (likelihood curvature Lam = R^T R), so the Gram matrix is
    never inverted; conditioning stays benign even for near-singular L.
    """
    m = dataset.m
    if m == 0:
        return LaplaceFit(np.zeros(0), np.zeros((0, 0)), True, 0.0, 0,
                          alpha=np.zeros(0), s_map=0.0)
    gram = _gram(dataset, kernel)
    L = gram.matrix
    LU = L[:, :m] - L[:, m:]          # L U^T for the winner-minus-loser map
    ULU = LU[:m] - LU[m:]             # U L U^T
    s = endpoint_std(dataset, noise)

    f = np.zeros(2 * m)
    a = np.zeros(2 * m)
    nll, g_lik, lam = _nll_terms(f, dataset, noise, s)
    s_val = nll
    converged = False
    grad_norm = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        grad_norm = float(np.linalg.norm(g_lik + a))
        if grad_norm <= tol * (1.0 + float(np.linalg.norm(f))):
            converged = True
            break
        rd = np.sqrt(lam)
        # Newton target: a+ = b - R^T (I + R L R^T)^{-1} R L b, b = Lam f - grad_lik
        q = lam * (f[:m] - f[m:])
        b = np.concatenate([q, -q]) - g_lik
        C = np.eye(m) + rd[:, None] * ULU * rd[None, :]
        t = L @ b
        y = PsdMatrix.factor(C).solve(rd * (t[:m] - t[m:]))
        a_new = b - np.concatenate([rd * y, -(rd * y)])
        f_new = L @ a_new
        da, df = a_new - a, f_new - f
        step = 1.0
        for _ in range(50):
            f_c = f + step * df
            a_c = a + step * da
            z_c = (f_c[:m] - f_c[m:]) / s
            cand = -float(np.sum(log_std_normal_cdf(z_c))) + 0.5 * float(a_c @ f_c)
            if cand <= s_val:
                break
            step *= 0.5
        else:
            raise LineSearchError(
                f"no descent after 50 halvings at iteration {it} "
                f"(S={s_val:.6g}, |grad|={grad_norm:.3g})"
            )
        f, a, s_val = f_c, a_c, cand
        nll, g_lik, lam = _nll_terms(f, dataset, noise, s)
    else:
        grad_norm = float(np.linalg.norm(g_lik + a))
        converged = grad_norm <= tol * (1.0 + float(np.linalg.norm(f)))
    return LaplaceFit(
        f, _likelihood_curvature(f, dataset, noise), converged, grad_norm, it,
        alpha=a, s_map=s_val,
    )


def log_evidence(
    fit: LaplaceFit, dataset: DuelDataset, kernel: RbfKernelParams, noise
) -> float:
    """Laplace log marginal likelihood, -S(f_map) - 1/2 log det(I + L Lam).

    det(I + L Lam) collapses to the m-by-m det(I + R L R^T) through the
    curvature factorization Lam = R^T R; only Cholesky log-determinants are
    formed and only in the log domain.
    """
    m = dataset.m
    if m == 0:
        return 0.0
    if not fit.converged:
        raise ValueError("evidence requires a converged MAP fit")
    gram = _gram(dataset, kernel)
    L = gram.matrix
    s = endpoint_std(dataset, noise)
    f = fit.f_map
    z = (f[:m] - f[m:]) / s
    ratio = normal_pdf_cdf_ratio(z)
    lam = ratio * (ratio + z) / (s * s)
    rd = np.sqrt(lam)
    LU = L[:, :m] - L[:, m:]
    ULU = LU[:m] - LU[m:]
    C = np.eye(m) + rd[:, None] * ULU * rd[None, :]
    try:
        logdet = PsdMatrix.factor(C).logdet()
    except NotPositiveDefiniteError as err:
        eigs = np.linalg.eigvalsh(0.5 * (C + C.T))
        raise NotPositiveDefiniteError(
            f"evidence matrix indefinite; eigenvalues {eigs}", err.jitter
        ) from err
    s_map = fit.s_map
    if not np.isfinite(s_map):
        s_map = neg_log_posterior(f, dataset, kernel, noise, gram=gram)
    return float(-s_map - 0.5 * logdet)


@dataclass(frozen=True)
class SurrogateHyperparams:
    lengthscale: float
    bandwidth: float | None
    scale: float
    log_evidence: float


def _evidence_at(dataset, noise, lengthscale, signal_variance):
    kernel = RbfKernelParams(lengthscale, signal_variance)
    fit = fit_map(dataset, kernel, noise)
    return log_evidence(fit, dataset, kernel, noise)


def fit_hyperparams(
    dataset: DuelDataset,
    noise,
    lengthscale_bounds: tuple[float, float],
    mode: str = "lengthscale",
    bandwidth_bounds: tuple[float, float] | None = None,
    signal_variance: float = 1.0,
    grid_size: int = 16,
) -> SurrogateHyperparams:
    """Maximize the Laplace evidence over the kernel lengthscale.

    mode="joint" also searches the KDE bandwidth (noise must then be an
    AnchorModel); the noise scale is user-supplied and never fitted.
    """
    if dataset.m < 2:
        raise ValueError("need at least 2 duels to fit hyperparameters")
    lo, hi = lengthscale_bounds
    if not 0 < lo <= hi:
        raise ValueError("invalid lengthscale bounds")
    if mode not in ("lengthscale", "joint"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "joint" and not isinstance(noise, AnchorModel):
        raise ValueError("joint mode needs an AnchorModel noise model")

    scale = noise.scale
    base_bw = getattr(noise, "bandwidth", None)

    # failed probes get a huge finite value; inf upsets bounded Brent
    BAD = 1e30

    def objective(log_l, log_h=None):
        model = noise if log_h is None else replace(noise, bandwidth=float(np.exp(log_h)))
        try:
            val = -_evidence_at(dataset, model, float(np.exp(log_l)), signal_variance)
            return val if np.isfinite(val) else BAD
        except (NotPositiveDefiniteError, LineSearchError, ValueError):
            return BAD

    if mode == "lengthscale":
        if grid_size == 1:
            grid = np.array([np.sqrt(lo * hi)])
        else:
            grid = np.exp(np.linspace(np.log(lo), np.log(hi), grid_size))
        objs = np.array([objective(np.log(g)) for g in grid])
        if not np.any(objs < BAD):
            raise RuntimeError("evidence evaluation failed at every probed lengthscale")
        k = int(np.argmin(objs))
        best_l, best_obj = float(grid[k]), float(objs[k])
        if grid_size > 1:
            res = minimize_scalar(
                objective,
                bounds=(np.log(grid[max(k - 1, 0)]), np.log(grid[min(k + 1, grid.size - 1)])),
                method="bounded",
                options={"xatol": 1e-4},
            )
            if res.fun < BAD and res.fun <= best_obj:
                best_l, best_obj = float(np.exp(res.x)), float(res.fun)
        return SurrogateHyperparams(best_l, base_bw, scale, -best_obj)

    h_lo, h_hi = bandwidth_bounds if bandwidth_bounds else (base_bw / 10, base_bw * 10)
    n_l = max(grid_size // 2, 2)
    n_h = max(grid_size // 2, 2)
    lgrid = np.exp(np.linspace(np.log(lo), np.log(hi), n_l))
    hgrid = np.exp(np.linspace(np.log(h_lo), np.log(h_hi), n_h))
    best = (BAD, None, None)
    for lg in lgrid:
        for hg in hgrid:
            val = objective(np.log(lg), np.log(hg))
            if val < best[0]:
                best = (val, lg, hg)
    if best[1] is None:
        raise RuntimeError("evidence evaluation failed at every probed point")

    def penalized(t):
        log_l = np.clip(t[0], np.log(lo), np.log(hi))
        log_h = np.clip(t[1], np.log(h_lo), np.log(h_hi))
        return objective(log_l, log_h)

    res = minimize(
        penalized,
        x0=np.log([best[1], best[2]]),
        method="Nelder-Mead",
        options={"maxiter": 60, "xatol": 1e-3, "fatol": 1e-6},
    )
    best_obj, best_l, best_h = best
    if res.fun < BAD and res.fun <= best_obj:
        best_obj = float(res.fun)
        best_l = float(np.exp(np.clip(res.x[0], np.log(lo), np.log(hi))))
        best_h = float(np.exp(np.clip(res.x[1], np.log(h_lo), np.log(h_hi))))
    return SurrogateHyperparams(best_l, best_h, scale, -best_obj)


def save_duels(path, dataset: DuelDataset, header: str = "") -> None:
    """Write one duel per row: winner coordinates then loser coordinates."""
    from .noise import save_points

    if dataset.m == 0:
        rows = np.zeros((0, 0))
    else:
        rows = np.hstack(
            [dataset.X[: dataset.m], dataset.X[dataset.m :]]
        )
    save_points(path, rows, header=header)


def load_duels(path, dim: int) -> DuelDataset:
    from .noise import load_points

    rows = load_points(path, dim=2 * dim)
    ds = DuelDataset(dim=dim)
    for row in rows:
        ds.append(DuelRecord(row[:dim], row[dim:]))
    return ds
