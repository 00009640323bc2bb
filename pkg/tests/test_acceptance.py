"""Acceptance suite: one pass/fail line per criterion, tolerances pinned.

Heavy experiment criteria share module-scoped suite runs. Wall-clock budgets
are asserted alongside the statistical checks.
"""

import time

import numpy as np
import pytest
from scipy.stats import binomtest, kstest

from hetpbo.benchmarks import SimulatedHuman, answer_duel, make_benchmark
from hetpbo.core import RbfKernelParams, std_normal_cdf
from hetpbo.harness import ExperimentConfig, read_trace_csv, run_suite, run_trial, trace_to_csv
from hetpbo.inference import build_joint, gibbs_chain, gibbs_hallucinate, hb_predict
from hetpbo.noise import AnchorModel, ConstantDensityModel, TrueUncertaintyOracle, rate_check
from hetpbo.prefmodel import (
    DuelDataset,
    DuelRecord,
    duel_z,
    grad_and_hessian,
    neg_log_posterior,
)

SEEDS_HEADLINE = tuple(range(30))
SEEDS_DESK = tuple(range(10))
WORKERS = 2


def report(name: str, ok: bool, detail: str = ""):
    suffix = f" ({detail})" if detail else ""
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}{suffix}", flush=True)
    assert ok, f"{name}{suffix}"


def sign_test_pvalue(averse_values, neutral_values) -> float:
    """One-sided paired sign test that the risk-averse values are smaller."""
    diffs = np.asarray(neutral_values) - np.asarray(averse_values)
    n = int(np.sum(diffs != 0))
    wins = int(np.sum(diffs > 0))
    if n == 0:
        return 1.0
    return float(binomtest(wins, n, 0.5, alternative="greater").pvalue)


def random_model_instance(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    m = int(rng.integers(1, 11))
    ds = DuelDataset(dim=d)
    for _ in range(m):
        w, l = rng.random((2, d))
        while np.array_equal(w, l):
            l = rng.random(d)
        ds.append(DuelRecord(w, l))
    kernel = RbfKernelParams(float(rng.uniform(0.15, 0.6)))
    noise = AnchorModel(rng.random((5, d)), float(rng.uniform(0.2, 0.5)),
                        float(rng.uniform(0.1, 1.0)))
    f = 0.7 * rng.standard_normal(2 * m)
    return ds, kernel, noise, f


class TestLikelihoodGradients:
    def test_gradient_hessian_finite_differences(self):
        t0 = time.perf_counter()
        worst_g = worst_h = 0.0
        for seed in range(100):
            ds, kernel, noise, f = random_model_instance(seed)
            fun = lambda v: neg_log_posterior(v, ds, kernel, noise)
            g, H = grad_and_hessian(f, ds, kernel, noise)
            n = f.size
            g_fd = np.zeros(n)
            h = 1e-6
            for i in range(n):
                e = np.zeros(n); e[i] = h
                g_fd[i] = (fun(f + e) - fun(f - e)) / (2 * h)
            rel_g = np.linalg.norm(g - g_fd) / max(1.0, np.linalg.norm(g))
            hh = 1e-4
            H_fd = np.zeros((n, n))
            for i in range(n):
                for j in range(i, n):
                    ei = np.zeros(n); ei[i] = hh
                    ej = np.zeros(n); ej[j] = hh
                    H_fd[i, j] = H_fd[j, i] = (
                        fun(f + ei + ej) - fun(f + ei - ej)
                        - fun(f - ei + ej) + fun(f - ei - ej)
                    ) / (4 * hh * hh)
            rel_h = np.abs(H - H_fd).max() / max(1.0, np.abs(H).max())
            worst_g, worst_h = max(worst_g, rel_g), max(worst_h, rel_h)
        elapsed = time.perf_counter() - t0
        ok = worst_g <= 1e-5 and worst_h <= 1e-5 and elapsed < 60
        report(
            "likelihood-gradient-correctness", ok,
            f"max grad rel {worst_g:.2e}, max hess rel {worst_h:.2e}, "
            f"{elapsed:.1f}s over 100 instances",
        )


class TestHomoscedasticReduction:
    def test_constant_density_matches_classical_likelihood(self):
        rng = np.random.default_rng(7)
        c, a = 0.61, 0.8
        noise = ConstantDensityModel(level=c, scale=a)
        sigma2 = a * np.exp(-c)
        worst = 0.0
        for _ in range(20):
            m = int(rng.integers(1, 12))
            ds = DuelDataset(dim=2)
            for _ in range(m):
                w, l = rng.random((2, 2))
                ds.append(DuelRecord(w, l))
            f = rng.standard_normal(2 * m)
            for k in range(m):
                z = duel_z(k, f, ds, noise)
                z_hom = (f[k] - f[m + k]) / np.sqrt(2.0 * sigma2)
                worst = max(worst, abs(z - z_hom))
        report(
            "homoscedastic-reduction", worst <= 1e-12,
            f"max |z - z_hom| = {worst:.2e}",
        )


class TestGenerativeConsistency:
    def test_duel_frequencies_match_probit(self):
        t0 = time.perf_counter()
        spec = make_benchmark("sine1d", a=0.1)
        human = SimulatedHuman(spec, np.random.default_rng(0))
        grid = np.linspace(0.05, 1.95, 40)
        pairs = [([grid[2 * i]], [grid[2 * i + 1]]) for i in range(20)]
        n = 100_000
        worst = 0.0
        for x, y in pairs:
            p = human.win_probability(x, y)
            wins = 0
            for _ in range(n):
                if answer_duel(human, x, y).winner[0] == x[0]:
                    wins += 1
            worst = max(worst, abs(wins / n - p))
        elapsed = time.perf_counter() - t0
        ok = worst <= 0.01 and elapsed < 300
        report(
            "generative-consistency", ok,
            f"max |freq - probit| = {worst:.4f} over 20 pairs, {elapsed:.0f}s",
        )


class TestGibbsValidity:
    def test_diagonal_ks_and_predictive_bruteforce(self):
        variances = np.array([1.0, 0.3, 2.5, 0.8, 1.7])
        samples = gibbs_chain(
            np.diag(variances), 10_000, burn_in=50,
            rng=np.random.default_rng(0),
        )
        min_p = 1.0
        for j, v in enumerate(variances):
            sd = np.sqrt(v)
            res = kstest(samples[:, j], lambda x: 2.0 * std_normal_cdf(x / sd))
            min_p = min(min_p, res.pvalue)

        worst = 0.0
        for seed in range(6):
            rng = np.random.default_rng(100 + seed)
            d = int(rng.integers(1, 4))
            ds = DuelDataset(dim=d)
            for _ in range(int(rng.integers(2, 7))):
                w, l = rng.random((2, d))
                ds.append(DuelRecord(w, l))
            kernel = RbfKernelParams(0.4)
            noise = AnchorModel(rng.random((4, d)), 0.3, 0.5)
            X_star = rng.random((4, d))
            joint = build_joint(X_star, ds, kernel, noise)
            h = gibbs_hallucinate(joint.v_v, 30, rng)
            p = hb_predict(X_star, ds, kernel, noise, h)
            inv = np.linalg.inv(joint.v_v)
            mean_bf = joint.test_v @ inv @ h.values
            cov_bf = joint.test_test - joint.test_v @ inv @ joint.test_v.T
            cov_bf = 0.5 * (cov_bf + cov_bf.T)
            worst = max(
                worst,
                float(np.abs(p.mean - mean_bf).max()),
                float(np.abs(p.cov - cov_bf).max()),
            )
        ok = min_p > 0.01 and worst <= 1e-8
        report(
            "gibbs-validity", ok,
            f"min KS p-value {min_p:.3f}; max predictive dev {worst:.1e}",
        )


class TestTheoremOneRate:
    def test_rate_exponent_at_desk_scale(self):
        t0 = time.perf_counter()
        oracle = TrueUncertaintyOracle("gaussian", [0.25], 0.125, scale=0.1)
        res = rate_check(
            oracle, [50, 100, 200, 400, 800, 1600], alpha=0.3, beta=2.0,
            trials=50, rng=np.random.default_rng(0),
        )
        elapsed = time.perf_counter() - t0
        ok = -1.2 <= res.slope <= -0.5 and elapsed < 600
        report(
            "theorem1-rate", ok,
            f"slope {res.slope:.3f} (theory -0.8), {elapsed:.0f}s",
        )


def _suite(tmp_path_factory, name, **cfg_kw):
    out = tmp_path_factory.mktemp(name)
    cfg = ExperimentConfig(workers=WORKERS, **cfg_kw)
    summary = run_suite(cfg, out_dir=out)
    return cfg, out, summary


def _per_seed_series(out_dir, seeds, column):
    series = []
    for s in seeds:
        header, data = read_trace_csv(out_dir / f"trace_seed{s}.csv")
        series.append(data[:, header.index(column)])
    return np.array(series)


@pytest.fixture(scope="module")
def sine_suites(tmp_path_factory):
    t0 = time.perf_counter()
    suites = {}
    for kind in ("anpei", "ei", "rahbo", "ucb"):
        suites[kind] = _suite(
            tmp_path_factory, f"sine_{kind}",
            benchmark="sine1d", a=0.1, acq_kind=kind, iterations=30,
            rho_values=(0.0, 3.0), seeds=SEEDS_HEADLINE,
        )
    suites["elapsed"] = time.perf_counter() - t0
    return suites


class TestSine1dHeadline:
    def test_all_acquisitions_reach_optimum(self, sine_suites):
        fractions = {}
        for kind in ("anpei", "ei", "rahbo", "ucb"):
            _, _, summary = sine_suites[kind]
            best = np.array(summary["final"]["best_f"]["per_seed"])
            fractions[kind] = float(np.mean(1.0 - best < 0.05))
        ok = all(v >= 0.8 for v in fractions.values())
        detail = ", ".join(f"{k} {v:.0%}" for k, v in fractions.items())
        report("sine1d-headline-reach", ok, f"regret<0.05 by T=30: {detail}")

    def test_risk_averse_beats_neutral_on_cumulative_regret(self, sine_suites):
        finals = {}
        for kind in ("anpei", "ei", "rahbo", "ucb"):
            _, _, summary = sine_suites[kind]
            finals[kind] = summary["final"]["cum_regret_rho3"]["per_seed"]
        p_anpei = sign_test_pvalue(finals["anpei"], finals["ei"])
        p_rahbo = sign_test_pvalue(finals["rahbo"], finals["ucb"])
        elapsed = sine_suites["elapsed"]
        ok = p_anpei < 0.05 and p_rahbo < 0.05 and elapsed < 7200
        report(
            "sine1d-headline-sign-test", ok,
            f"ANPEI<EI p={p_anpei:.2e}, RAHBO<UCB p={p_rahbo:.2e}, "
            f"suites took {elapsed:.0f}s",
        )


@pytest.fixture(scope="module")
def plateau_suites(tmp_path_factory):
    t0 = time.perf_counter()
    suites = {}
    for bench, T, a in (("branin2d", 40, 1.0), ("hartmann4d", 25, 2.0)):
        for kind in ("anpei", "ei", "rahbo", "ucb"):
            suites[(bench, kind)] = _suite(
                tmp_path_factory, f"{bench}_{kind}",
                benchmark=bench, a=a, acq_kind=kind, iterations=T,
                rho_values=(0.0,), seeds=SEEDS_DESK,
            )
    suites["elapsed"] = time.perf_counter() - t0
    return suites


class TestBraninHartmannOrdering:
    @pytest.mark.parametrize("bench", ["branin2d", "hartmann4d"])
    def test_noise_ordering_and_value_gap(self, plateau_suites, bench):
        mean_s2 = {}
        best_f = {}
        for kind in ("anpei", "ei", "rahbo", "ucb"):
            cfg, out, summary = plateau_suites[(bench, kind)]
            s2 = _per_seed_series(out, SEEDS_DESK, "sigma2_true")
            mean_s2[kind] = s2.mean(axis=1)
            best_f[kind] = float(
                np.mean(summary["final"]["best_f"]["per_seed"])
            )
        pooled_averse = np.concatenate([mean_s2["anpei"], mean_s2["rahbo"]])
        pooled_neutral = np.concatenate([mean_s2["ei"], mean_s2["ucb"]])
        p = sign_test_pvalue(pooled_averse, pooled_neutral)

        spec = make_benchmark(bench)
        gap = max(
            best_f["ei"] - best_f["anpei"], best_f["ucb"] - best_f["rahbo"], 0.0
        )
        gap_ok = gap <= 0.10 * spec.value_range
        elapsed = plateau_suites["elapsed"]
        ok = p < 0.05 and gap_ok and elapsed < 10800
        report(
            f"{bench}-qualitative-ordering", ok,
            f"sigma2 sign test p={p:.2e}; best-value gap {gap:.3g} "
            f"<= 10% range {0.1 * spec.value_range:.3g}; suites {elapsed:.0f}s",
        )


@pytest.fixture(scope="module")
def ablation_suites(tmp_path_factory):
    suites = {}
    for tag, extra in (
        ("student_t", dict(oracle_family="student_t", oracle_dof=5.0)),
        ("evidence", dict(bandwidth_mode="evidence", lengthscale_grid=8)),
    ):
        for kind in ("anpei", "ei", "rahbo", "ucb"):
            suites[(tag, kind)] = _suite(
                tmp_path_factory, f"abl_{tag}_{kind}",
                benchmark="hartmann4d", a=2.0, acq_kind=kind, iterations=25,
                rho_values=(0.0,), seeds=SEEDS_DESK, **extra,
            )
    return suites


class TestAblations:
    @pytest.mark.parametrize("tag", ["student_t", "evidence"])
    def test_ablation_completes_with_ordering(self, ablation_suites, tag):
        mean_s2 = {}
        aborted = 0
        for kind in ("anpei", "ei", "rahbo", "ucb"):
            cfg, out, summary = ablation_suites[(tag, kind)]
            aborted += summary["n_aborted"]
            assert (out / "aggregate.csv").exists()
            header, _ = read_trace_csv(out / "aggregate.csv")
            assert "sigma2_true_mean" in header
            s2 = _per_seed_series(out, SEEDS_DESK, "sigma2_true")
            mean_s2[kind] = s2.mean(axis=1)
        pooled_averse = np.concatenate([mean_s2["anpei"], mean_s2["rahbo"]])
        pooled_neutral = np.concatenate([mean_s2["ei"], mean_s2["ucb"]])
        p = sign_test_pvalue(pooled_averse, pooled_neutral)
        ok = aborted == 0 and p < 0.05
        report(
            f"ablation-{tag}", ok,
            f"0 aborted={aborted == 0}, sigma2 ordering p={p:.2e}",
        )


class TestDeterminism:
    def test_byte_identical_traces(self):
        cfg = ExperimentConfig(
            benchmark="sine1d", a=0.1, acq_kind="anpei", iterations=30,
            rho_values=(0.0, 3.0), seeds=(11,),
        )
        a = run_trial(cfg, 11)
        b = run_trial(cfg, 11)
        csv_a = trace_to_csv(a, cfg.rho_values, 1)
        csv_b = trace_to_csv(b, cfg.rho_values, 1)

        # wall_ms records real elapsed time and is excluded from the byte
        # comparison; every scientific column must match exactly
        def strip_wall(text):
            return "\n".join(
                ",".join(line.split(",")[:-1]) for line in text.splitlines()
            )

        ok = strip_wall(csv_a) == strip_wall(csv_b) and not a.aborted
        report(
            "determinism", ok,
            "byte-identical trace CSVs across reruns (wall_ms column aside)",
        )
