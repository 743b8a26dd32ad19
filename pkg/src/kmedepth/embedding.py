"""Kernel mean embeddings used as depth functions.

The marginal embedding ``(1/n) sum_i k(., y_i)`` is an integrated depth
on the response space.  Its conditional counterpart replaces the uniform
weights by ridge-regression coefficients ``beta(x)`` computed from a
kernel on the predictor space, optionally with per-observation survey
weights.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DataError, NumericalError
from .kernel import KernelSpec, ResponseObject, ResponseSample, SampleLike, as_sample, cross_gram, gram_matrix


def empirical_depth(refs: SampleLike, k_y: KernelSpec, y: SampleLike) -> np.ndarray | float:
    """Empirical kernel mean embedding of ``refs`` evaluated at ``y``.

    Returns a float for a single query object and an array for a sample.
    """
    single = isinstance(y, ResponseObject)
    refs = as_sample(refs)
    depth = cross_gram(k_y, as_sample(y), refs).mean(axis=1)
    return float(depth[0]) if single else depth


def default_lambda(n: int) -> float:
    return 1e-3 * n


@dataclass(frozen=True, eq=False)
class CkmeModel:
    """Fitted conditional kernel mean embedding.

    The linear system ``(K_X W + lam I)`` is factorized once; coefficient
    queries are back-substitutions.
    """

    X: ResponseSample
    Y: ResponseSample
    k_x: KernelSpec
    k_y: KernelSpec
    lam: float
    weights: np.ndarray
    _factor: tuple = field(repr=False)
    _cholesky: bool = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.X)

    def system_matrix(self) -> np.ndarray:
        """``K_X W + lam I`` rebuilt from the stored factorization."""
        if self._cholesky:
            c, lower = self._factor
            L = np.tril(c) if lower else np.triu(c).T
            return L @ L.T
        lu, piv = self._factor
        L = np.tril(lu, -1) + np.eye(self.n)
        U = np.triu(lu)
        A = L @ U
        # undo the row interchanges recorded by getrf, last swap first
        for i in range(self.n - 1, -1, -1):
            j = piv[i]
            if j != i:
                A[[i, j]] = A[[j, i]]
        return A

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._cholesky:
            return linalg.cho_solve(self._factor, rhs)
        return linalg.lu_solve(self._factor, rhs)

    def coefficients(self, X: SampleLike) -> np.ndarray:
        """Coefficient matrix with column ``j`` equal to ``beta(X[j])``."""
        kx = cross_gram(self.k_x, self.X, as_sample(X))
        return self.weights[:, None] * self.solve(kx)

    def depth(self, X: SampleLike, Y: SampleLike) -> np.ndarray:
        """Conditional depth of each ``Y[j]`` given its paired ``X[j]``."""
        X, Y = as_sample(X), as_sample(Y)
        if len(X) != len(Y):
            raise DataError("predictor and response samples differ in length")
        B = self.coefficients(X)
        Ky = cross_gram(self.k_y, Y, self.Y)
        return np.einsum("ji,ij->j", Ky, B)

    def depth_at(self, x: SampleLike, Y: SampleLike) -> np.ndarray:
        """Conditional depth of many responses given one predictor."""
        beta = self.coefficients(as_sample(x))[:, 0]
        return cross_gram(self.k_y, as_sample(Y), self.Y) @ beta


def fit_ckme(xs: SampleLike, ys: SampleLike, k_x: KernelSpec, k_y: KernelSpec,
             lam: float | None = None, weights=None) -> CkmeModel:
    """Fit a (survey-weighted) conditional kernel mean embedding.

    With weights ``w`` the coefficients are ``W (K_X W + lam I)^{-1} k_X(x)``,
    which minimizes ``sum_i w_i ||phi(y_i) - C psi(x_i)||^2 + lam ||C||_HS^2``.
    ``lam=None`` uses ``1e-3 * n``.  ``lam=0`` is accepted only when the
    system is comfortably nonsingular.
    """
    X, Y = as_sample(xs), as_sample(ys)
    n = len(X)
    if n < 1 or len(Y) != n:
        raise DataError(f"need paired samples, got {len(X)} predictors and {len(Y)} responses")
    if weights is None:
        w = np.ones(n)
    else:
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.size != n:
            raise DataError(f"{w.size} weights for {n} observations")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise DataError("weights must be finite and nonnegative")
    lam = default_lambda(n) if lam is None else float(lam)
    if lam < 0 or not np.isfinite(lam):
        raise DataError(f"regularization must be nonnegative, got {lam}")

    K = gram_matrix(k_x, X)
    uniform = bool(np.all(w == 1.0))
    A = K * w[None, :] + lam * np.eye(n)
    if lam == 0:
        rcond = 1.0 / np.linalg.cond(A)
        if not np.isfinite(rcond) or rcond < 1e-13:
            raise NumericalError("singular system at lam=0; use a positive regularization")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", linalg.LinAlgWarning)
            if uniform and lam > 0:
                factor = linalg.cho_factor(A, lower=True)
            else:
                factor = linalg.lu_factor(A)
    except (linalg.LinAlgError, linalg.LinAlgWarning) as exc:
        raise NumericalError(f"failed to factorize the ridge system: {exc}") from exc
    w.setflags(write=False)
    return CkmeModel(X, Y, k_x, k_y, lam, w, factor, uniform and lam > 0)


def ckme_coefficients(model: CkmeModel, x) -> np.ndarray:
    """``beta(x)`` for a single predictor object, as a length-``n`` vector."""
    return model.coefficients(as_sample(x))[:, 0]


def conditional_depth(model: CkmeModel, x, y) -> float:
    """``sum_i beta_i(x) k_Y(y, y_i)``; not confined to (0, 1]."""
    return float(model.depth_at(as_sample(x), as_sample(y))[0])
