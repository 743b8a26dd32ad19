"""Estimators of the conditional distribution of depth scores.

Both estimators model ``g(x, r) = P(score <= r | X = x)``.

* :class:`BetaGamlssModel` is a two-parameter beta regression: the mean
  has a logit link and the precision a log link, each linear in the raw
  predictor coordinates plus an intercept.  Scores are clamped into
  ``[eps, 1 - eps]`` first.
* :class:`KnnCdfModel` is the empirical CDF of the scores attached to
  the ``k`` nearest stored predictors.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc, digamma, expit, gammaln

from .errors import DataError, DegenerateDataError, NumericalError
from .kernel import METRIC_FOR_KIND, ResponseSample, SampleLike, as_sample, pairwise_sq_distances

DEFAULT_CLAMP = 1e-3
RIDGE_JITTER = 1e-8


def _design(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return np.column_stack([np.ones(len(X)), X])


def _predictor_matrix(X) -> np.ndarray:
    if isinstance(X, ResponseSample):
        return X.values
    return np.atleast_2d(np.asarray(X, dtype=float))


# --- beta log-likelihood ------------------------------------------------------

def _split(params, q):
    return params[:q], params[q:]


def beta_loglik(params, design, r) -> float:
    """Mean beta log-likelihood of scores ``r`` under stacked coefficients.

    ``params`` holds the mean coefficients followed by the precision
    coefficients, each of length ``design.shape[1]``.
    """
    b_mu, b_phi = _split(np.asarray(params, dtype=float), design.shape[1])
    mu = expit(design @ b_mu)
    phi = np.exp(design @ b_phi)
    a, b = mu * phi, (1 - mu) * phi
    ll = (gammaln(phi) - gammaln(a) - gammaln(b)
          + (a - 1) * np.log(r) + (b - 1) * np.log1p(-r))
    return float(np.mean(ll))


def beta_loglik_grad(params, design, r) -> np.ndarray:
    """Gradient of :func:`beta_loglik`."""
    b_mu, b_phi = _split(np.asarray(params, dtype=float), design.shape[1])
    mu = expit(design @ b_mu)
    phi = np.exp(design @ b_phi)
    a, b = mu * phi, (1 - mu) * phi
    log_r, log_1r = np.log(r), np.log1p(-r)
    psi_a, psi_b = digamma(a), digamma(b)
    d_mu = phi * (log_r - log_1r - psi_a + psi_b)
    d_phi = digamma(phi) - mu * psi_a - (1 - mu) * psi_b + mu * log_r + (1 - mu) * log_1r
    g_mu = design.T @ (d_mu * mu * (1 - mu))
    g_phi = design.T @ (d_phi * phi)
    return np.concatenate([g_mu, g_phi]) / len(r)


@dataclass(frozen=True, eq=False)
class BetaGamlssModel:
    coef_mean: np.ndarray
    coef_precision: np.ndarray
    clamp: float = DEFAULT_CLAMP
    converged: bool = True
    loglik: float = float("nan")
    n_iter: int = 0
    rank_deficient: bool = False
    loglik_trace: tuple = field(default=(), repr=False)

    def mean(self, X) -> np.ndarray:
        return expit(_design(_predictor_matrix(X)) @ self.coef_mean)

    def precision(self, X) -> np.ndarray:
        return np.exp(_design(_predictor_matrix(X)) @ self.coef_precision)

    def cdf(self, X, r) -> np.ndarray:
        """Fitted conditional CDF at paired predictors and scores."""
        mu, phi = self.mean(X), self.precision(X)
        r = np.broadcast_to(np.asarray(r, dtype=float), mu.shape)
        out = betainc(mu * phi, (1 - mu) * phi, np.clip(r, self.clamp, 1 - self.clamp))
        out = np.where(r <= self.clamp, 0.0, out)
        return np.where(r >= 1 - self.clamp, 1.0, out)


def _bfgs_ascent(f, grad, x0, tol, max_iter):
    """Quasi-Newton maximization with Armijo backtracking.

    Returns ``(x, converged, n_iter, trace)`` where ``trace`` lists the
    objective after every accepted step (starting from ``x0``).
    """
    x = np.array(x0, dtype=float)
    fx, g = f(x), grad(x)
    H = np.eye(x.size)
    trace = [fx]
    scaled = False
    for it in range(max_iter):
        if np.max(np.abs(g)) < tol:
            return x, True, it, trace
        d = H @ g
        slope = g @ d
        if slope <= 0:
            H = np.eye(x.size)
            d, slope = g.copy(), g @ g
        t = 1.0
        while True:
            x_new = x + t * d
            f_new = f(x_new)
            if np.isfinite(f_new) and f_new >= fx + 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-14:
                return x, False, it, trace
        g_new = grad(x_new)
        s, y = x_new - x, g_new - g
        sy = -(s @ y)  # curvature of the negated objective
        if sy > 1e-14:
            if not scaled:
                H = (sy / (y @ y)) * np.eye(x.size)
                scaled = True
            rho = 1.0 / sy
            V = np.eye(x.size) + rho * np.outer(s, y)
            H = V @ H @ V.T + rho * np.outer(s, s)
        x, fx, g = x_new, f_new, g_new
        trace.append(fx)
    return x, bool(np.max(np.abs(g)) < tol), max_iter, trace


def fit_beta_cdf_model(X, r, clamp: float = DEFAULT_CLAMP, tol: float = 1e-6,
                       max_iter: int = 200) -> BetaGamlssModel:
    """Maximum-likelihood beta regression of scores ``r`` on predictors ``X``.

    Convergence is declared when the sup-norm of the gradient of the mean
    log-likelihood drops below ``tol``.
    """
    if not 0 < clamp < 0.01:
        raise ValueError("clamp must lie in (0, 0.01)")
    D = _design(_predictor_matrix(X))
    r = np.asarray(r, dtype=float).reshape(-1)
    n, q = D.shape
    if len(r) != n:
        raise DataError(f"{len(r)} scores for {n} predictors")
    if n < 2 * q:
        raise DataError(f"beta regression with {q} coefficients per parameter needs {2 * q} pairs")
    if not (np.all(np.isfinite(D)) and np.all(np.isfinite(r))):
        raise DataError("predictors and scores must be finite")
    r = np.clip(r, clamp, 1 - clamp)
    var = r.var()
    if var == 0:
        raise DegenerateDataError("all scores are equal after clamping")
    rbar = r.mean()
    phi0 = rbar * (1 - rbar) / var - 1
    x0 = np.zeros(2 * q)
    x0[0] = math.log(rbar / (1 - rbar))
    x0[q] = math.log(phi0) if phi0 > 0 else 0.0

    rank_deficient = np.linalg.matrix_rank(D) < q
    if rank_deficient:
        warnings.warn("rank-deficient design; adding ridge jitter", RuntimeWarning, stacklevel=2)
    jitter = RIDGE_JITTER if rank_deficient else 0.0

    def f(theta):
        return beta_loglik(theta, D, r) - 0.5 * jitter * theta @ theta

    def grad(theta):
        return beta_loglik_grad(theta, D, r) - jitter * theta

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        theta, converged, n_iter, trace = _bfgs_ascent(f, grad, x0, tol, max_iter)
    ll = beta_loglik(theta, D, r)
    if not np.isfinite(ll):
        raise NumericalError("beta log-likelihood is not finite at the fitted parameters")
    if not converged:
        warnings.warn(f"beta regression stopped after {n_iter} iterations without converging",
                      RuntimeWarning, stacklevel=2)
    return BetaGamlssModel(theta[:q].copy(), theta[q:].copy(), clamp, converged, ll,
                           n_iter, bool(rank_deficient), tuple(trace))


def beta_cdf_eval(model: BetaGamlssModel, x, r: float) -> float:
    return float(model.cdf(np.asarray(x, dtype=float).reshape(1, -1), r)[0])


# --- k nearest neighbours -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class KnnCdfModel:
    X: ResponseSample
    scores: np.ndarray
    k: int
    metric: str

    def neighbour_scores(self, X: SampleLike) -> np.ndarray:
        """Scores of the ``k`` nearest stored points, one sorted row per query.

        Distance ties go to the lower stored index.
        """
        d2 = pairwise_sq_distances(self.metric, as_sample(X), self.X)
        idx = np.argsort(d2, axis=1, kind="stable")[:, : self.k]
        return np.sort(self.scores[idx], axis=1)

    def cdf(self, X, r) -> np.ndarray:
        ns = self.neighbour_scores(_as_predictors(X))
        r = np.broadcast_to(np.asarray(r, dtype=float), (ns.shape[0],))
        return (ns <= r[:, None]).sum(axis=1) / self.k

    def cdf_given_neighbours(self, ns_row: np.ndarray, r) -> np.ndarray:
        """CDF for many scores ``r`` sharing one sorted neighbour row."""
        return np.searchsorted(ns_row, np.asarray(r, dtype=float), side="right") / self.k


def _as_predictors(X) -> ResponseSample:
    if isinstance(X, ResponseSample):
        return X
    return ResponseSample("euclidean", np.atleast_2d(np.asarray(X, dtype=float)))


def default_k(n: int) -> int:
    return max(1, math.ceil(math.sqrt(n)))


def fit_knn_cdf_model(X, r, k: int | None = None, metric: str | None = None) -> KnnCdfModel:
    X = _as_predictors(X)
    r = np.asarray(r, dtype=float).reshape(-1)
    n = len(X)
    if len(r) != n:
        raise DataError(f"{len(r)} scores for {n} predictors")
    k = default_k(n) if k is None else int(k)
    if not 1 <= k <= n:
        raise DataError(f"k must lie in [1, {n}], got {k}")
    metric = METRIC_FOR_KIND[X.kind] if metric is None else metric
    r = r.copy()
    r.setflags(write=False)
    return KnnCdfModel(X, r, k, metric)


def knn_cdf_eval(model: KnnCdfModel, x, r: float) -> float:
    if not isinstance(x, ResponseSample):
        x = np.asarray(x, dtype=float).reshape(1, -1)
    return float(model.cdf(x, r)[0])
