"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is echoed in a dedicated section of
the pytest terminal summary. Run with ``pytest tests/test_acceptance.py -v``.
"""

import math
import subprocess
import sys
import time

import mpmath as mp
import numpy as np
import pytest
from scipy import stats

from rmsgof.cdf import cdf_eval
from rmsgof.models import (
    BinCounts,
    InfiniteModel,
    contingency2x2,
    mle_estimate,
    poisson,
    score,
    truncate_support,
    zipf,
)
from rmsgof.montecarlo import SimulationConfig, run_simulations
from rmsgof.spectrum import build_B, build_constraints, model_spectrum, orthonormal_basis, variance_spectrum
from rmsgof.statistic import confidence_level

from conftest import ACCEPTANCE_LINES, REFERENCE_CASES

KS_CRITICAL = 1.63 / math.sqrt(500)
SEEDS = (101, 202, 303)


def record(number, title, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})")
    return ok


def test_c1_chi_square_equivalence():
    start = time.perf_counter()
    worst = 0.0
    for dof in (1, 2, 3, 5, 10):
        dist = stats.chi2(dof)
        for x in dist.ppf(np.linspace(0.001, 0.999, 20)):
            worst = max(worst, abs(cdf_eval(x, np.ones(dof)) - dist.cdf(x)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 5.0
    assert record(1, "chi-square equivalence", ok, f"max error {worst:.2e}, {elapsed:.2f} s")


def test_c2_contingency_closed_form():
    model = contingency2x2()
    q = orthonormal_basis(build_constraints(model, 0.5))
    spec = variance_spectrum(build_B(model, 0.5, q))
    lam = spec.eigenvalues
    top = np.abs(lam).max()
    zeros = int(np.count_nonzero(np.abs(lam) <= 1e-8 * top))
    rel = float(np.max(np.abs(spec.variances / (24 / 625) - 1)))
    ok = zeros == 2 and spec.variances.size == 2 and rel <= 1e-12
    assert record(2, "contingency spectrum closed form", ok, f"{zeros} zeros, variance rel error {rel:.1e}")


def _reference_variances(name, theta):
    """Dense eigensolve of B formed explicitly in 50-digit arithmetic."""
    with mp.workdps(50):
        t = mp.mpf(theta)
        if name == "contingency2x2":
            rows = [mp.mpf("0.04"), mp.mpf("0.04"), mp.mpf("0.96"), mp.mpf("0.96")]
            p = [rows[0] * t, rows[1] * (1 - t), rows[2] * t, rows[3] * (1 - t)]
            d = [1 / t, -1 / (1 - t), 1 / t, -1 / (1 - t)]
        elif name == "zipf":
            w = [mp.mpf(k) ** (-t) for k in range(1, 101)]
            z = mp.fsum(w)
            mean_log = mp.fsum(wk * mp.log(k) for k, wk in enumerate(w, start=1)) / z
            p = [wk / z for wk in w]
            d = [mean_log - mp.log(k) for k in range(1, 101)]
        else:
            n = truncate_support(poisson(), theta).n_bins
            p = [mp.exp(-t) * t**k / mp.factorial(k) for k in range(n)]
            d = [mp.mpf(k) / t - 1 for k in range(n)]
        n = len(p)
        h = mp.matrix(n, 2)
        for i in range(n):
            h[i, 0], h[i, 1] = 1, d[i]
        q, _ = mp.qr(h, mode="skinny")
        proj = mp.eye(n) - q * q.T
        b = proj * mp.diag([1 / v for v in p]) * proj
        lam = mp.eigsy(b, eigvals_only=True)
        lam = sorted((lam[i] for i in range(n)), key=abs)[2:]
        return np.sort(np.array([float(1 / v) for v in lam]))


def test_c3_spectrum_brute_force(models):
    worst = {}
    for name, theta in REFERENCE_CASES:
        got = model_spectrum(models[name], theta).variances
        ref = _reference_variances(name, theta)
        worst[name] = float(np.max(np.abs(got / ref - 1))) if got.shape == ref.shape else math.inf
    ok = max(worst.values()) <= 1e-10
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    assert record(3, "spectrum vs dense eigensolve", ok, detail)


@pytest.fixture(scope="module")
def desk_runs():
    runs = {}
    for name, theta in REFERENCE_CASES:
        model = {"contingency2x2": contingency2x2(), "zipf": zipf(100), "poisson": poisson()}[name]
        runs[name] = [run_simulations(SimulationConfig(model, theta, 20000, 500, seed)) for seed in SEEDS]
    return runs


@pytest.mark.slow
def test_c4_qq_uniformity(desk_runs):
    passes = {}
    for name, reports in desk_runs.items():
        passes[name] = sum(r.ks_distance < KS_CRITICAL for r in reports)
    ok = all(v >= 2 for v in passes.values())
    ks = {name: ", ".join(f"{r.ks_distance:.3f}" for r in reports) for name, reports in desk_runs.items()}
    excluded = sum(sum(r.excluded.values()) for reports in desk_runs.values() for r in reports)
    detail = "; ".join(f"{k} KS [{ks[k]}] {passes[k]}/3" for k in desk_runs) + f"; excluded {excluded}"
    assert record(4, f"Q-Q uniformity, KS < {KS_CRITICAL:.4f}", ok, detail)


@pytest.mark.slow
def test_c5_node_ceiling(desk_runs):
    worst = {name: max(r.max_nodes for r in reports) for name, reports in desk_runs.items()}
    ok = max(worst.values()) <= 1000
    assert record(5, "quadrature node ceiling", ok, ", ".join(f"{k} {v}" for k, v in worst.items()))


def test_c6_monte_carlo_cdf(models):
    variances = model_spectrum(models["zipf"], 1.0).variances
    rng = np.random.default_rng(6)
    draws = np.sort((rng.standard_normal((100_000, variances.size)) ** 2) @ variances)
    probe = draws[np.linspace(0, draws.size - 1, 400).astype(int)]
    exact = np.array([cdf_eval(x, variances) for x in probe])
    # compare against the empirical CDF on both sides of each jump
    above = np.searchsorted(draws, probe, side="right") / draws.size
    below = np.searchsorted(draws, probe, side="left") / draws.size
    worst = float(max(np.max(np.abs(exact - above)), np.max(np.abs(exact - below))))
    assert record(6, "Monte-Carlo CDF agreement", worst <= 0.01, f"sup error {worst:.4f}")


def _random_theta(rng, name):
    return {"contingency2x2": lambda: rng.uniform(0.05, 0.95),
            "zipf": lambda: rng.uniform(-2.0, 3.0),
            "poisson": lambda: rng.uniform(0.5, 50.0)}[name]()


def test_c7_score_zero(models):
    rng = np.random.default_rng(7)
    worst = {}
    for name, model in models.items():
        worst[name] = 0.0
        for _ in range(100):
            theta = _random_theta(rng, name)
            p = truncate_support(model, theta).prob(theta) if isinstance(model, InfiniteModel) else model.prob(theta)
            counts = BinCounts(rng.multinomial(int(rng.integers(100, 100_000)), p / p.sum()))
            t_hat = mle_estimate(model, counts)
            worst[name] = max(worst[name], abs(score(model, counts.fractions(), t_hat)))
    ok = max(worst.values()) <= 1e-10
    assert record(7, "score vanishes at the estimate", ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


def _simulate(out, workers):
    argv = [sys.executable, "-m", "rmsgof", "simulate", "--model", "zipf", "--theta", "1",
            "--m", "20000", "--j", "40", "--seed", "8", "--out", str(out), "--workers", str(workers)]
    subprocess.run(argv, check=True, capture_output=True)
    return out.read_bytes()


def test_c8_determinism(tmp_path):
    first = _simulate(tmp_path / "a.csv", 1)
    second = _simulate(tmp_path / "b.csv", 1)
    threaded = _simulate(tmp_path / "c.csv", 4)
    ok = first == second == threaded and first.count(b"\n") == 41
    assert record(8, "deterministic simulate output", ok, "two runs and 1 vs 4 workers byte-identical" if ok else "outputs differ")


def test_c9_throughput(models):
    model = models["zipf"]
    rng = np.random.default_rng(9)
    p = model.prob(1.0)
    batches = [BinCounts(rng.multinomial(20000, p)) for _ in range(1000)]
    start = time.perf_counter()
    for counts in batches:
        confidence_level(model, counts)
    elapsed = time.perf_counter() - start
    assert record(9, "1000 Zipf evaluations", elapsed < 60.0, f"{elapsed:.1f} s")
