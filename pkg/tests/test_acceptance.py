"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they
happen (they are also repeated in the pytest terminal summary), or as a
script: ``python tests/test_acceptance.py``.
"""

import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import yaml
from scipy import stats

from kmedepth.conddist import beta_loglik, beta_loglik_grad, fit_beta_cdf_model
from kmedepth.conformal import (SplitPlan, bootstrap_tolerance_threshold, fit_homoscedastic_region,
                                threshold_rank)
from kmedepth.embedding import fit_ckme
from kmedepth.evaluation import coverage_experiment, length_stability_profile
from kmedepth.kernel import KernelSpec
from kmedepth.simulate import ScenarioConfig, derive_seed, generate
from kmedepth.tolerance import (content_distribution, expectation_tolerance_region,
                                gaussian_kernel_population_depth)

ACCEPTANCE_RESULTS = []


def report(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_RESULTS.append(line)
    print(line, flush=True)
    assert ok, line


# 1 --------------------------------------------------------------------------

def test_criterion_01_homoscedastic_coverage():
    t0 = time.time()
    scn = ScenarioConfig("euclid_homo", n=2000, p=2, m=1, rho=0.5)
    rep = coverage_experiment(scn, [0.05], reps=100, seed=1, test_size=2000)
    cov = rep.coverages()
    small = coverage_experiment(ScenarioConfig("euclid_homo", n=500), [0.05], reps=50, seed=2)
    large = coverage_experiment(ScenarioConfig("euclid_homo", n=5000), [0.05], reps=50, seed=2)
    sd_small, sd_large = small.coverages().std(ddof=1), large.coverages().std(ddof=1)
    ok = len(cov) == 100 and 0.94 <= cov.mean() <= 0.96 and sd_large < sd_small
    report(1, ok, f"mean coverage {cov.mean():.4f} in [0.94, 0.96] over {len(cov)} reps; "
                  f"sd n=5000 {sd_large:.4f} < sd n=500 {sd_small:.4f} ({time.time() - t0:.0f}s)")


# 2 --------------------------------------------------------------------------

def test_criterion_02_interval_length():
    lengths, spreads = {}, {}
    for p in (1, 2):
        scn = ScenarioConfig("euclid_homo", n=2000, p=p, seed=derive_seed(3, "length", p))
        model = fit_homoscedastic_region(generate(scn), SplitPlan(seed=derive_seed(3, "split", p)))
        prof = length_stability_profile(model, 0.1, percentiles=(20, 80))
        lengths[p], spreads[p] = prof.mean, prof.spread
    ok = all(3.1 <= lengths[p] <= 3.5 and spreads[p] < 0.3 for p in (1, 2))
    detail = "; ".join(f"p={p}: mean length {lengths[p]:.3f} in [3.1, 3.5], spread {spreads[p]:.3f} < 0.3"
                       for p in (1, 2))
    report(2, ok, detail + " (normal-theory length 3.290)")


# 3 --------------------------------------------------------------------------

def test_criterion_03_heteroscedastic_coverage():
    t0 = time.time()
    parts, ok = [], True
    scns = [ScenarioConfig("euclid_hetero", n=2000, p=p, m=2) for p in (2, 5)]
    for cdf in ("knn", "beta"):
        rep = coverage_experiment(scns, [0.05], reps=50, seed=4, test_size=2000, cdf=cdf)
        for p in (2, 5):
            cov = rep.coverages(p=p)
            good = len(cov) == 50 and 0.93 <= cov.mean() <= 0.97
            ok &= good
            parts.append(f"{cdf} p={p}: {cov.mean():.4f}")
    report(3, ok, "mean coverage in [0.93, 0.97]: " + ", ".join(parts)
           + f" ({time.time() - t0:.0f}s)")


# 4 --------------------------------------------------------------------------

def test_criterion_04_functional_and_distributional():
    parts, ok = [], True
    for name in ("functional", "distributional"):
        rep = coverage_experiment(ScenarioConfig(name, n=1000), [0.05], reps=50, seed=5,
                                  test_size=2000)
        cov = rep.coverages()
        good = len(cov) == 50 and 0.93 <= cov.mean() <= 0.97
        ok &= good
        parts.append(f"{name}: {cov.mean():.4f}")
    report(4, ok, "mean coverage in [0.93, 0.97]: " + ", ".join(parts))


# 5 --------------------------------------------------------------------------

def test_criterion_05_beta_content_law():
    n, content, gamma, reps = 99, 0.9, 0.5, 2000
    rng = np.random.default_rng(derive_seed(6, "beta-law"))
    depth = lambda s: gaussian_kernel_population_depth(s.values[:, 0], gamma)
    cov, ranks = np.empty(reps), set()
    for i in range(reps):
        y = rng.standard_normal((n, 1))
        region = expectation_tolerance_region(y, None, content, depth_fn=depth)
        ranks.add(region.rank)
        # the population depth decreases in |y|: the region is an interval |y| <= a
        a = np.sort(np.abs(y[:, 0]))[region.rank - 1]
        cov[i] = 2 * stats.norm.cdf(a) - 1
    law = content_distribution(n, 90)
    ks = stats.kstest(cov, law.cdf).statistic
    ok = ranks == {90} and abs(cov.mean() - 0.9) <= 0.01 and ks < 0.05
    report(5, ok, f"rank {sorted(ranks)}, mean content {cov.mean():.4f} within 0.01 of 0.9, "
                  f"KS vs Beta(90, 10) {ks:.4f} < 0.05")


# 6 --------------------------------------------------------------------------

def _feature_space_coefficients(X, w, lam, xq, gamma):
    pts = np.vstack([X, xq])
    G = np.exp(-gamma * ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    s, V = np.linalg.eigh(G)
    keep = s > 1e-12 * s.max()
    Psi = (V[:, keep] * np.sqrt(s[keep])).T
    n = len(X)
    D = Psi.shape[0]
    sw = np.sqrt(w)
    A = np.vstack([sw[:, None] * Psi[:, :n].T, np.sqrt(lam) * np.eye(D)])
    rhs = np.vstack([np.diag(sw), np.zeros((D, n))])
    return np.linalg.lstsq(A, rhs, rcond=None)[0].T @ Psi[:, n:]


def test_criterion_06_linear_algebra_identities():
    kx, ky = KernelSpec("euclidean_l2", 0.5), KernelSpec("euclidean_l2", 1.0)
    rng = np.random.default_rng(derive_seed(7, "linalg"))
    err_uniform = err_basis = err_weighted = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 60))
        X, Y, xq = rng.normal(size=(n, 2)), rng.normal(size=(n, 1)), rng.normal(size=(5, 2))
        a = fit_ckme(X, Y, kx, ky, lam=0.1).coefficients(xq)
        b = fit_ckme(X, Y, kx, ky, lam=0.1, weights=np.ones(n)).coefficients(xq)
        err_uniform = max(err_uniform, np.abs(a - b).max())
    for _ in range(20):
        n = int(rng.integers(2, 15))
        X = np.sort(rng.uniform(0, 3 * n, n))[:, None] + np.arange(n)[:, None]  # well separated
        m = fit_ckme(X, rng.normal(size=(n, 1)), kx, ky, lam=0.0)
        err_basis = max(err_basis, np.abs(m.coefficients(X) - np.eye(n)).max())
    for _ in range(20):
        n = int(rng.integers(2, 11))
        X, w = rng.normal(size=(n, 2)), rng.uniform(0.2, 3.0, n)
        lam, xq = 10 ** rng.uniform(-2, 0), rng.normal(size=(4, 2))
        got = fit_ckme(X, np.zeros((n, 1)), kx, ky, lam=lam, weights=w).coefficients(xq)
        err_weighted = max(err_weighted, np.abs(got - _feature_space_coefficients(X, w, lam, xq, 0.5)).max())
    ok = err_uniform <= 1e-10 and err_basis <= 1e-8 and err_weighted <= 1e-8
    report(6, ok, f"uniform-weight gap {err_uniform:.1e} <= 1e-10; lambda=0 basis gap {err_basis:.1e} "
                  f"<= 1e-8; weighted vs feature-space gap {err_weighted:.1e} <= 1e-8")


# 7 --------------------------------------------------------------------------

def test_criterion_07_beta_regression():
    rng = np.random.default_rng(derive_seed(8, "beta"))
    worst_grad = 0.0
    for _ in range(10):
        n, p = 300, int(rng.integers(1, 5))
        D = np.column_stack([np.ones(n), rng.normal(size=(n, p))])
        r = rng.uniform(0.01, 0.99, n)
        theta = rng.normal(scale=0.5, size=2 * (p + 1))
        h = 1e-5
        fd = np.array([(beta_loglik(theta + h * e, D, r) - beta_loglik(theta - h * e, D, r)) / (2 * h)
                       for e in np.eye(theta.size)])
        g = beta_loglik_grad(theta, D, r)
        worst_grad = max(worst_grad, np.max(np.abs(g - fd)) / np.max(np.abs(fd)))
    b_mu, b_phi = np.array([0.5, 1.0]), np.array([1.0, -0.5])
    x = rng.uniform(-1, 1, 5000)
    Dm = np.column_stack([np.ones(5000), x])
    mu, phi = 1 / (1 + np.exp(-Dm @ b_mu)), np.exp(Dm @ b_phi)
    y = rng.beta(mu * phi, (1 - mu) * phi)
    fit = fit_beta_cdf_model(x[:, None], y)
    err = max(np.abs(fit.coef_mean - b_mu).max(), np.abs(fit.coef_precision - b_phi).max())
    monotone = bool(np.all(np.diff(fit.loglik_trace) >= 0))
    ok = worst_grad < 1e-4 and err <= 0.1 and monotone and fit.converged
    report(7, ok, f"gradient rel. error {worst_grad:.1e} < 1e-4; coefficient error {err:.3f} <= 0.1 "
                  f"at n=5000; log-likelihood monotone over {len(fit.loglik_trace) - 1} steps: {monotone}")


# 8 --------------------------------------------------------------------------

def test_criterion_08_ranks_and_nesting():
    data = generate(ScenarioConfig("euclid_homo", n=4000, seed=derive_seed(9, "data")))
    model = fit_homoscedastic_region(data, SplitPlan(seed=derive_seed(9, "split")))
    test = generate(ScenarioConfig("euclid_homo", n=2000, seed=derive_seed(9, "test")))
    levels = model.anomaly(test.X, test.Y)
    ks = stats.kstest(levels, "uniform").statistic
    q = generate(ScenarioConfig("euclid_homo", n=1000, seed=derive_seed(9, "query")))
    rng = np.random.default_rng(derive_seed(9, "alphas"))
    alphas = np.sort(rng.uniform(0.001, 0.999, 200))
    scores = model.score(q.X, q.Y)
    inside = np.array([scores >= model.threshold(a) for a in alphas])
    nested = bool(np.all(inside[1:] <= inside[:-1]))
    equiv = all(np.array_equal(inside[i], levels_q <= 1 - (threshold_rank(a, model.m) + 1) / (model.m + 1))
                for levels_q in [model.anomaly(q.X, q.Y)] for i, a in enumerate(alphas))
    ok = model.m == 2000 and ks < 0.05 and nested and equiv
    report(8, ok, f"anomaly KS vs U(0,1) {ks:.4f} < 0.05 at m = n_test = 2000; nested over 200 alphas "
                  f"x 1000 queries: {nested}; anomaly/membership equivalence: {equiv}")


# 9 --------------------------------------------------------------------------

def test_criterion_09_bootstrap_tolerance():
    t0 = time.time()
    outer, hits, contents = 200, 0, []
    for rep in range(outer):
        data = generate(ScenarioConfig("euclid_homo", n=2000, seed=derive_seed(10, "data", rep)))
        model = fit_homoscedastic_region(data, SplitPlan(seed=derive_seed(10, "split", rep)))
        res = bootstrap_tolerance_threshold(model, 0.1, 0.9, 500, seed=derive_seed(10, "boot", rep))
        test = generate(ScenarioConfig("euclid_homo", n=20000, seed=derive_seed(10, "test", rep)))
        content = float(np.mean(model.score(test.X, test.Y) >= res.threshold))
        contents.append(content)
        hits += content >= 0.9
    frac = hits / outer
    report(9, frac >= 0.85, f"realized content >= 0.9 in {frac:.3f} of {outer} reps (>= 0.85); "
                            f"median content {np.median(contents):.4f} ({time.time() - t0:.0f}s)")


# 10 -------------------------------------------------------------------------

def _cli(args, cwd):
    cmd = [sys.executable, "-m", "kmedepth.cli", *args, "--quiet"]
    out = subprocess.run(cmd, cwd=cwd, capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    return out


def _run_all_commands(cwd: Path, threads: int):
    cwd.mkdir(parents=True, exist_ok=True)
    (cwd / "sim.yaml").write_text(yaml.safe_dump({"scenario": {"name": "euclid_hetero", "n": 600, "m": 2}}))
    (cwd / "run.yaml").write_text(yaml.safe_dump({
        "mode": "heteroscedastic", "model": "model.json",
        "data": {"train": "train.csv", "test": "test.csv", "query": "test.csv"},
        "bootstrap": {"B": 200}}))
    (cwd / "exp.yaml").write_text(yaml.safe_dump({"experiment": {
        "scenarios": ["euclid_homo", "euclid_hetero", "distributional"], "n": [300],
        "reps": 6, "test_size": 300, "length_points": 3}}))
    t = ["--threads", str(threads)]
    _cli(["simulate", "--config", "sim.yaml", "--seed", "11", "--out", "train.csv", *t], cwd)
    _cli(["simulate", "--config", "sim.yaml", "--seed", "12", "--out", "test.csv", *t], cwd)
    _cli(["fit", "--config", "run.yaml", "--seed", "13", "--out", "model.json", *t], cwd)
    a = ["--alpha", "0.1", "--alpha", "0.05"]
    _cli(["coverage", "--config", "run.yaml", "--seed", "13", "--out", "cov.csv", *a, *t], cwd)
    _cli(["tolerance", "--config", "run.yaml", "--seed", "13", "--out", "tol.json", *a, *t], cwd)
    _cli(["anomaly", "--config", "run.yaml", "--seed", "13", "--out", "anom.csv", *a, *t], cwd)
    _cli(["experiment", "--config", "exp.yaml", "--seed", "14", "--out", "exp.csv", *a, *t], cwd)
    names = ["train.csv", "test.csv", "model.json", "cov.csv", "cov.summary.json", "tol.json",
             "anom.csv", "exp.csv", "exp.summary.json"]
    return {n: (cwd / n).read_bytes() for n in names}


def test_criterion_10_determinism(tmp_path):
    first = _run_all_commands(tmp_path / "run1", 1)
    second = _run_all_commands(tmp_path / "run2", 1)
    threaded = _run_all_commands(tmp_path / "run3", 4)
    same_runs = first == second
    same_threads = first == threaded
    headers_ok = all(json.loads(first[n])["version"] == 1 for n in ("model.json", "tol.json"))
    report(10, same_runs and same_threads and headers_ok,
           f"{len(first)} artifacts from all six commands byte-identical across runs: {same_runs}; "
           f"across --threads 1/4: {same_threads}")


if __name__ == "__main__":
    import tempfile
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                if "tmp_path" in fn.__code__.co_varnames[:fn.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as d:
                        fn(Path(d))
                else:
                    fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
