"""Split-conformal prediction regions built on conditional kernel depth.

Homoscedastic mode uses two splits: the conditional embedding is fitted
on the first and the conditional depths of the second are the
calibration scores.  Heteroscedastic mode adds a middle split on which a
conditional CDF of the depth is fitted; calibration scores are that CDF
evaluated at the third split's depths.

A region at miscoverage ``alpha`` is ``{y : score(x, y) >= q}`` with
``q`` the calibration order statistic of rank ``floor(alpha (m + 1))``
counted from below, which gives marginal coverage at least
``1 - alpha`` under exchangeability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conddist import (BetaGamlssModel, KnnCdfModel, fit_beta_cdf_model, fit_knn_cdf_model,
                       DEFAULT_CLAMP)
from .embedding import CkmeModel, fit_ckme
from .errors import ConfigError, DegenerateDataError
from .kernel import METRIC_FOR_KIND, KernelSpec, as_sample, resolve_kernel
from .simulate import PairedSample, substream

MODES = ("homoscedastic", "heteroscedastic")
CDF_ESTIMATORS = ("knn", "beta")


@dataclass(frozen=True)
class SplitPlan:
    """Fractions of the sample assigned to the fit, middle and calibration splits.

    With ``fractions[2] == 0`` the plan has two splits: fit and calibration.
    """

    fractions: tuple = (0.5, 0.5, 0.0)
    seed: int = 0

    def __post_init__(self):
        f = tuple(float(v) for v in self.fractions)
        if len(f) != 3 or any(v < 0 for v in f) or abs(sum(f) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must be three nonnegative numbers summing to 1, got {f}")
        object.__setattr__(self, "fractions", f)

    @property
    def n_splits(self) -> int:
        return 2 if self.fractions[2] == 0 else 3

    def sizes(self, n: int) -> tuple[int, int, int]:
        f1, f2, f3 = self.fractions
        n1 = math.floor(f1 * n + 1e-9)
        if f3 == 0:
            sizes = (n1, n - n1, 0)
        else:
            n2 = math.floor(f2 * n + 1e-9)
            sizes = (n1, n2, n - n1 - n2)
        if any(s < 2 for s in sizes[: self.n_splits]):
            raise DegenerateDataError(f"split sizes {sizes} leave a split with fewer than 2 points")
        return sizes


HOMOSCEDASTIC_PLAN = (0.5, 0.5, 0.0)
HETEROSCEDASTIC_PLAN = (0.5, 0.25, 0.25)


def split_dataset(n: int, plan: SplitPlan) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seeded shuffle of ``range(n)`` cut into three contiguous index blocks."""
    n1, n2, _ = plan.sizes(n)
    perm = substream(plan.seed, "split").permutation(n)
    return perm[:n1], perm[n1:n1 + n2], perm[n1 + n2:]


def threshold_rank(alpha: float, m: int) -> int:
    """``floor(alpha (m + 1))``; below 1 the region is the whole space."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    # 1e-9 absorbs representation error, e.g. 0.1 * 1001
    return math.floor(alpha * (m + 1) + 1e-9)


def order_threshold(sorted_scores: np.ndarray, alpha: float) -> float:
    k = threshold_rank(alpha, len(sorted_scores))
    return -np.inf if k < 1 else float(sorted_scores[k - 1])


@dataclass(frozen=True, eq=False)
class PredictionModel:
    """Fitted region family; one model answers queries at every ``alpha``."""

    mode: str
    ckme: CkmeModel
    cal_scores: np.ndarray
    cdf_model: KnnCdfModel | BetaGamlssModel | None = None
    settings: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        s = np.sort(np.asarray(self.cal_scores, dtype=float))
        if s.size < 2:
            raise DegenerateDataError("need at least two calibration scores")
        s.setflags(write=False)
        object.__setattr__(self, "cal_scores", s)

    @property
    def m(self) -> int:
        return self.cal_scores.size

    def _transform(self, X, depth):
        if self.mode == "homoscedastic":
            return depth
        return heteroscedastic_score(self.cdf_model, X, depth)

    def score(self, X, Y) -> np.ndarray:
        """Conformity score of each pair ``(X[j], Y[j])``; larger is more central."""
        X, Y = as_sample(X), as_sample(Y)
        return self._transform(X, self.ckme.depth(X, Y))

    def score_at(self, x, Y) -> np.ndarray:
        """Scores of many responses against one predictor."""
        x, Y = as_sample(x), as_sample(Y)
        depth = self.ckme.depth_at(x, Y)
        if self.mode == "homoscedastic":
            return depth
        if isinstance(self.cdf_model, KnnCdfModel):
            ns = self.cdf_model.neighbour_scores(x)[0]
            g = self.cdf_model.cdf_given_neighbours(ns, depth)
            return _break_ties(self.cdf_model, g, depth)
        return heteroscedastic_score(self.cdf_model, np.repeat(x.values, len(depth), axis=0), depth)

    def threshold(self, alpha: float) -> float:
        return order_threshold(self.cal_scores, alpha)

    def contains(self, alpha: float, X, Y) -> np.ndarray:
        return self.score(X, Y) >= self.threshold(alpha)

    def anomaly(self, X, Y) -> np.ndarray:
        return anomaly_from_scores(self.cal_scores, self.score(X, Y))


def _tie_key(depth):
    return 0.5 + np.arctan(depth) / np.pi


def _break_ties(cdf_model, g, depth):
    # order by g first, then by depth among equal g; distinct g values stay apart
    if isinstance(cdf_model, KnnCdfModel):
        return g + _tie_key(depth) / (2 * cdf_model.k)
    c = cdf_model.clamp
    return np.where(depth <= c, _tie_key(depth) - 1.0,
                    np.where(depth >= 1 - c, 1.0 + _tie_key(depth), g))


def heteroscedastic_score(cdf_model, X, depth) -> np.ndarray:
    """Conditional CDF of the depth, with ties broken by the depth itself.

    The kNN CDF takes only ``k + 1`` values and the beta CDF is flat
    beyond its clamp, so raw CDF scores tie often; with many ties the
    conformal threshold sits on a plateau and the region overcovers.
    """
    depth = np.asarray(depth, dtype=float)
    return _break_ties(cdf_model, cdf_model.cdf(X, depth), depth)


def anomaly_from_scores(sorted_scores: np.ndarray, scores) -> np.ndarray:
    """``1 - (1 + #{calibration <= s}) / (m + 1)`` for each query score."""
    m = len(sorted_scores)
    count = np.searchsorted(sorted_scores, np.asarray(scores, dtype=float), side="right")
    return 1.0 - (1.0 + count) / (m + 1.0)


def _kernels(data: PairedSample, idx, k_x, k_y, x_gamma, y_gamma):
    X, Y = data.X.take(idx), data.Y.take(idx)
    if k_x is None:
        k_x = resolve_kernel(METRIC_FOR_KIND[X.kind], x_gamma, X)
    if k_y is None:
        k_y = resolve_kernel(METRIC_FOR_KIND[Y.kind], y_gamma, Y)
    return k_x, k_y


def _fit_embedding(data, idx, k_x, k_y, x_gamma, y_gamma, lam):
    k_x, k_y = _kernels(data, idx, k_x, k_y, x_gamma, y_gamma)
    w = None if data.weights is None else np.asarray(data.weights)[idx]
    return fit_ckme(data.X.take(idx), data.Y.take(idx), k_x, k_y, lam, w)


def fit_homoscedastic_region(data: PairedSample, plan: SplitPlan | None = None, *,
                             k_x: KernelSpec | None = None, k_y: KernelSpec | None = None,
                             x_gamma="median", y_gamma="median",
                             lam: float | None = None) -> PredictionModel:
    """Two-split region: embedding on split 1, depth calibration on split 2.

    Kernels not given explicitly are built on split 1 with the given gamma
    (``"median"`` for the median heuristic).  ``lam=None`` means
    ``1e-3 * n1``.  Survey weights on ``data`` enter the embedding fit.
    """
    plan = plan or SplitPlan(HOMOSCEDASTIC_PLAN)
    if plan.n_splits != 2:
        raise ConfigError("the homoscedastic region uses a two-split plan")
    i1, i2, _ = split_dataset(len(data), plan)
    ckme = _fit_embedding(data, i1, k_x, k_y, x_gamma, y_gamma, lam)
    cal = data.take(i2)
    scores = ckme.depth(cal.X, cal.Y)
    settings = dict(mode="homoscedastic", fractions=list(plan.fractions), split_seed=plan.seed,
                    lam=lam, x_gamma=x_gamma, y_gamma=y_gamma)
    return PredictionModel("homoscedastic", ckme, scores, None, settings)


def fit_heteroscedastic_region(data: PairedSample, plan: SplitPlan | None = None, *,
                               cdf: str = "knn", k: int | None = None,
                               clamp: float = DEFAULT_CLAMP,
                               k_x: KernelSpec | None = None, k_y: KernelSpec | None = None,
                               x_gamma="median", y_gamma="median",
                               lam: float | None = None) -> PredictionModel:
    """Three-split region with a fitted conditional CDF of the depth.

    ``cdf`` selects the estimator: ``"knn"`` (``k`` neighbours, default
    ``ceil(sqrt(n2))``) or ``"beta"`` (beta regression with scores clamped
    to ``[clamp, 1 - clamp]``).
    """
    if cdf not in CDF_ESTIMATORS:
        raise ConfigError(f"unknown conditional CDF estimator {cdf!r}")
    plan = plan or SplitPlan(HETEROSCEDASTIC_PLAN)
    if plan.n_splits != 3:
        raise ConfigError("the heteroscedastic region uses a three-split plan")
    i1, i2, i3 = split_dataset(len(data), plan)
    ckme = _fit_embedding(data, i1, k_x, k_y, x_gamma, y_gamma, lam)
    mid, cal = data.take(i2), data.take(i3)
    r_mid = ckme.depth(mid.X, mid.Y)
    if cdf == "knn":
        g = fit_knn_cdf_model(mid.X, r_mid, k)
    else:
        g = fit_beta_cdf_model(mid.X, r_mid, clamp=clamp)
    scores = heteroscedastic_score(g, cal.X, ckme.depth(cal.X, cal.Y))
    settings = dict(mode="heteroscedastic", fractions=list(plan.fractions), split_seed=plan.seed,
                    lam=lam, x_gamma=x_gamma, y_gamma=y_gamma, cdf=cdf, k=k, clamp=clamp)
    return PredictionModel("heteroscedastic", ckme, scores, g, settings)


def fit_region(data: PairedSample, mode: str = "homoscedastic", plan: SplitPlan | None = None,
               **kwargs) -> PredictionModel:
    if mode == "homoscedastic":
        for key in ("cdf", "k", "clamp"):
            kwargs.pop(key, None)
        return fit_homoscedastic_region(data, plan, **kwargs)
    if mode == "heteroscedastic":
        return fit_heteroscedastic_region(data, plan, **kwargs)
    raise ConfigError(f"unknown mode {mode!r}")


def region_contains(model: PredictionModel, alpha: float, x, y) -> bool:
    return bool(model.contains(alpha, as_sample(x), as_sample(y))[0])


def anomaly_level(model: PredictionModel, x, y) -> float:
    """Conformal anomaly level of a single pair: near 1 for outlying responses."""
    return float(model.anomaly(as_sample(x), as_sample(y))[0])


@dataclass(frozen=True)
class BootstrapThreshold:
    threshold: float
    replicates: np.ndarray = field(repr=False)
    n_degenerate: int = 0

    def __float__(self):
        return self.threshold


def bootstrap_tolerance_threshold(model: PredictionModel, alpha: float, confidence: float,
                                  n_boot: int = 500, seed: int = 0,
                                  data: PairedSample | None = None) -> BootstrapThreshold:
    """Low threshold for a region of content ``1 - alpha`` at level ``confidence``.

    Each replicate resamples the calibration scores with replacement and
    recomputes the order-statistic threshold; the result is the empirical
    ``(1 - confidence)`` quantile of the replicates.  Passing the original
    ``data`` instead refits the whole pipeline on each resample, with the
    settings stored on ``model``.
    """
    if n_boot < 100:
        raise ConfigError("use at least 100 bootstrap resamples")
    if not 0.0 < confidence < 1.0:
        raise ConfigError("confidence must lie in (0, 1)")
    thresholds = np.empty(n_boot)
    degenerate = 0
    for b in range(n_boot):
        rng = substream(seed, "bootstrap", b)
        if data is None:
            s = model.cal_scores[rng.integers(0, model.m, model.m)]
            thresholds[b] = order_threshold(np.sort(s), alpha)
        else:
            boot = data.take(rng.integers(0, len(data), len(data)))
            refit = refit_like(model, boot)
            s = refit.cal_scores
            thresholds[b] = refit.threshold(alpha)
        if s.min() == s.max():
            degenerate += 1
    q = float(np.quantile(thresholds, 1.0 - confidence))
    return BootstrapThreshold(q, thresholds, degenerate)


def refit_like(model: PredictionModel, data: PairedSample) -> PredictionModel:
    """Rerun the fitting pipeline of ``model`` on new data."""
    st = dict(model.settings)
    plan = SplitPlan(tuple(st.pop("fractions")), st.pop("split_seed"))
    mode = st.pop("mode")
    return fit_region(data, mode, plan, **st)
