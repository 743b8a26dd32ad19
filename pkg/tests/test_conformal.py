import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from kmedepth.conformal import (PredictionModel, SplitPlan, anomaly_from_scores, anomaly_level,
                                bootstrap_tolerance_threshold, fit_heteroscedastic_region,
                                fit_homoscedastic_region, fit_region, order_threshold,
                                region_contains, split_dataset, threshold_rank)
from kmedepth.embedding import fit_ckme
from kmedepth.errors import ConfigError, DegenerateDataError
from kmedepth.kernel import KernelSpec, ResponseSample
from kmedepth.simulate import PairedSample, ScenarioConfig, generate

K = KernelSpec("euclidean_l2", 0.5)


def _model(scores, mode="homoscedastic"):
    ckme = fit_ckme(np.zeros((1, 1)), np.zeros((1, 1)), K, K, lam=1.0)
    return PredictionModel(mode, ckme, np.asarray(scores, dtype=float))


def _homo(n, seed, p=2):
    return generate(ScenarioConfig("euclid_homo", n=n, p=p, seed=seed))


# --- splits -------------------------------------------------------------------

def test_split_sizes_and_determinism():
    a = split_dataset(10, SplitPlan((0.5, 0.5, 0.0), 7))
    b = split_dataset(10, SplitPlan((0.5, 0.5, 0.0), 7))
    assert [len(s) for s in a] == [5, 5, 0]
    for u, v in zip(a, b):
        np.testing.assert_array_equal(u, v)
    c = split_dataset(9, SplitPlan((1 / 3, 1 / 3, 1 / 3), 1))
    assert [len(s) for s in c] == [3, 3, 3]
    assert sorted(np.concatenate(c).tolist()) == list(range(9))
    d = split_dataset(10, SplitPlan((0.5, 0.5, 0.0), 8))
    assert not np.array_equal(a[0], d[0])


def test_split_errors():
    with pytest.raises(DegenerateDataError):
        split_dataset(3, SplitPlan((0.5, 0.5, 0.0)))
    with pytest.raises(ConfigError):
        SplitPlan((0.5, 0.6, 0.0))
    with pytest.raises(ConfigError):
        SplitPlan((1.2, -0.2, 0.0))


@settings(max_examples=50, deadline=None)
@given(st.integers(8, 500), st.integers(0, 2**31))
def test_split_partition_property(n, seed):
    parts = split_dataset(n, SplitPlan((0.5, 0.25, 0.25), seed))
    allidx = np.concatenate(parts)
    assert len(allidx) == n and len(np.unique(allidx)) == n
    assert min(len(p) for p in parts) >= 1


# --- thresholds and anomaly levels --------------------------------------------

def test_threshold_hand_example():
    m = _model(np.arange(1, 10) / 10)
    assert threshold_rank(0.2, 9) == 2
    assert m.threshold(0.2) == pytest.approx(0.2)
    assert (0.25 >= m.threshold(0.2)) and not (0.15 >= m.threshold(0.2))
    assert m.threshold(0.05) == -np.inf         # rank 0: whole space


def test_anomaly_extremes():
    s = np.sort(np.random.default_rng(0).normal(size=50))
    assert anomaly_from_scores(s, [s[0] - 1])[0] == pytest.approx(1 - 1 / 51)
    assert anomaly_from_scores(s, [s[-1] + 1])[0] == 0.0


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 200), st.integers(0, 2**31))
def test_anomaly_membership_equivalence(m, seed):
    rng = np.random.default_rng(seed)
    cal = np.sort(np.round(rng.normal(size=m), 1))        # rounding creates ties
    q = np.round(rng.normal(size=50), 1)
    a = anomaly_from_scores(cal, q)
    for alpha in rng.uniform(0.001, 0.999, size=10):
        k = threshold_rank(alpha, m)
        inside = q >= order_threshold(cal, alpha)
        np.testing.assert_array_equal(inside, a <= 1 - (k + 1) / (m + 1) + 1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 200), st.integers(0, 2**31))
def test_rank_invariance_under_monotone_transform(m, seed):
    rng = np.random.default_rng(seed)
    cal, q = np.sort(rng.normal(size=m)), rng.normal(size=30)
    f = lambda s: np.exp(2 * s) + s**3
    for alpha in (0.05, 0.2, 0.5, 0.9):
        np.testing.assert_array_equal(q >= order_threshold(cal, alpha),
                                      f(q) >= order_threshold(f(cal), alpha))
    np.testing.assert_array_equal(anomaly_from_scores(cal, q), anomaly_from_scores(f(cal), f(q)))


# --- fitted regions -----------------------------------------------------------

def test_homoscedastic_bookkeeping():
    data = _homo(18, seed=1)
    model = fit_homoscedastic_region(data, SplitPlan((0.5, 0.5, 0.0), 3))
    assert model.m == 9
    assert np.all(np.diff(model.cal_scores) >= 0)
    assert not model.cal_scores.flags.writeable
    with pytest.raises(ConfigError):
        fit_homoscedastic_region(data, SplitPlan((0.5, 0.25, 0.25)))
    with pytest.raises(ConfigError):
        fit_heteroscedastic_region(data, SplitPlan((0.5, 0.5, 0.0)))


def test_constant_response_saturates():
    # depths equal sum(beta(x)); with constant predictors too, that sum is shared
    X = ResponseSample("euclidean", np.zeros((40, 2)))
    Y = ResponseSample("euclidean", np.full((40, 1), 1.5))
    model = fit_homoscedastic_region(PairedSample(X, Y), SplitPlan((0.5, 0.5, 0.0), 0),
                                     k_x=K, k_y=KernelSpec("euclidean_l2", 1.0))
    s = model.cal_scores
    assert s.max() - s.min() < 1e-12
    x = X.take([0])
    for alpha in (0.05, 0.3, 0.9):
        assert model.contains(alpha, x, Y.take([0]))[0]
        assert not model.contains(alpha, x, np.array([[9.0]]))[0]


def test_single_fit_coverage_near_target():
    model = fit_homoscedastic_region(_homo(1000, seed=5), SplitPlan(seed=1))
    test = _homo(4000, seed=6)
    cov = model.contains(0.2, test.X, test.Y).mean()
    se = np.sqrt(0.16 / 4000 + 0.16 / 500)  # test noise plus calibration noise
    assert cov >= 0.8 - 3 * se


def test_marginal_validity_over_replications():
    R, n_test, covs = 60, 500, []
    for rep in range(R):
        model = fit_homoscedastic_region(_homo(200, seed=1000 + rep, p=1), SplitPlan(seed=rep))
        test = _homo(n_test, seed=5000 + rep, p=1)
        covs.append(model.contains(0.2, test.X, test.Y).mean())
    # binomial floor plus between-rep spread of the calibration quantile
    assert np.mean(covs) >= 0.8 - 3 * np.std(covs) / np.sqrt(R)


@pytest.mark.parametrize("cdf", ["knn", "beta"])
def test_heteroscedastic_pipeline_on_homoscedastic_data(cdf):
    model = fit_heteroscedastic_region(_homo(1200, seed=7), SplitPlan((0.5, 0.25, 0.25), 2), cdf=cdf)
    test = _homo(3000, seed=8)
    cov = model.contains(0.1, test.X, test.Y).mean()
    assert abs(cov - 0.9) < 3 * np.sqrt(0.09 / 3000 + 0.09 / 300)
    assert model.settings["cdf"] == cdf


def test_knn_full_neighbourhood_reduces_to_marginal_ranks():
    data = _homo(400, seed=9)
    plan = SplitPlan((0.5, 0.25, 0.25), 4)
    model = fit_heteroscedastic_region(data, plan, cdf="knn", k=100)
    _, i2, i3 = split_dataset(400, plan)
    r_mid = model.ckme.depth(data.X.take(i2), data.Y.take(i2))
    r_cal = model.ckme.depth(data.X.take(i3), data.Y.take(i3))
    ecdf = (r_mid[None, :] <= r_cal[:, None]).mean(axis=1)
    # each score is its marginal ECDF value plus a depth tie-break below 1/(2k)
    diff = np.sort(model.cal_scores) - np.sort(ecdf)
    assert np.all(diff > 0) and np.all(diff < 1 / 200)


def test_nested_in_alpha():
    model = fit_homoscedastic_region(_homo(600, seed=10), SplitPlan(seed=0))
    q = _homo(1000, seed=11)
    alphas = np.linspace(0.01, 0.99, 30)
    inside = np.array([model.contains(a, q.X, q.Y) for a in alphas])
    assert np.all(inside[1:] <= inside[:-1])


def test_scalar_queries_and_anomaly():
    data = _homo(300, seed=12)
    model = fit_region(data, "homoscedastic", SplitPlan(seed=0), cdf="knn", k=3)
    x, y = data.X.take([0]), data.Y.take([0])
    a = anomaly_level(model, x, y)
    assert 0 <= a < 1
    assert region_contains(model, 0.2, x, y) == bool(a <= 1 - (threshold_rank(0.2, 150) + 1) / 151)
    far = np.array([[100.0]])
    assert anomaly_level(model, x, far) == pytest.approx(1 - 1 / 151)
    with pytest.raises(ConfigError):
        fit_region(data, "robust")


def test_anomaly_uniform_on_fresh_data():
    model = fit_homoscedastic_region(_homo(2000, seed=13), SplitPlan(seed=3))
    test = _homo(1000, seed=14)
    a = model.anomaly(test.X, test.Y)
    assert stats.kstest(a, "uniform").statistic < 0.07


# --- bootstrap ----------------------------------------------------------------

def test_bootstrap_constant_scores():
    res = bootstrap_tolerance_threshold(_model(np.full(50, 0.3)), 0.1, 0.9, 200, seed=1)
    assert res.threshold == pytest.approx(0.3)
    assert res.n_degenerate == 200
    assert float(res) == res.threshold


def test_bootstrap_median_at_half_confidence_and_low_side():
    scores = np.random.default_rng(4).normal(size=300)
    model = _model(scores)
    half = bootstrap_tolerance_threshold(model, 0.1, 0.5, 300, seed=2)
    assert half.threshold == pytest.approx(np.median(half.replicates))
    high = bootstrap_tolerance_threshold(model, 0.1, 0.9, 300, seed=2)
    assert high.threshold <= half.threshold
    again = bootstrap_tolerance_threshold(model, 0.1, 0.9, 300, seed=2)
    np.testing.assert_array_equal(high.replicates, again.replicates)


def test_bootstrap_validation():
    with pytest.raises(ConfigError):
        bootstrap_tolerance_threshold(_model([0.1, 0.2]), 0.1, 0.9, 50)
    with pytest.raises(ConfigError):
        bootstrap_tolerance_threshold(_model([0.1, 0.2]), 0.1, 1.0, 200)


def test_bootstrap_refit_path():
    data = _homo(120, seed=15)
    model = fit_homoscedastic_region(data, SplitPlan(seed=0))
    res = bootstrap_tolerance_threshold(model, 0.2, 0.8, 100, seed=0, data=data)
    assert res.replicates.shape == (100,) and np.all(np.isfinite(res.replicates))
