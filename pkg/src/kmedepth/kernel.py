"""Response objects, metrics and Gaussian kernels.

Three kinds of response are supported: plain Euclidean vectors, curves
sampled on a grid in [0, 1], and quantile functions sampled on a
probability grid in (0, 1).  Curves and quantile functions in one sample
share a single grid, which makes every metric here a weighted Euclidean
distance between value vectors.  Integration over [0, 1] uses the
trapezoid rule on the grid, with the end values held constant out to 0
and 1 when the grid does not reach them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import DegenerateDataError, IncompatibleResponseError

KINDS = ("euclidean", "curve", "quantile")
METRICS = ("euclidean_l2", "functional_l2", "wasserstein2")

METRIC_FOR_KIND = {
    "euclidean": "euclidean_l2",
    "curve": "functional_l2",
    "quantile": "wasserstein2",
}


def quadrature_weights(grid) -> np.ndarray:
    """Trapezoid weights on ``grid`` for an integral over [0, 1].

    The first and last grid values are extended as constants to the
    interval ends, so the weights always sum to one.
    """
    t = np.asarray(grid, dtype=float)
    if t.size == 1:
        return np.ones(1)
    w = np.empty_like(t)
    dt = np.diff(t)
    w[0] = dt[0] / 2 + t[0]
    w[-1] = dt[-1] / 2 + (1.0 - t[-1])
    w[1:-1] = (dt[:-1] + dt[1:]) / 2
    return w


def _check_grid(kind, grid, size):
    if kind == "euclidean":
        if grid is not None:
            raise IncompatibleResponseError("euclidean responses carry no grid")
        return None
    if grid is None:
        raise IncompatibleResponseError(f"{kind} responses need a grid")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size != size:
        raise IncompatibleResponseError(
            f"grid length {grid.size} does not match {size} values")
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise IncompatibleResponseError("grid must be strictly increasing")
    if kind == "curve" and (grid[0] < 0 or grid[-1] > 1):
        raise IncompatibleResponseError("curve grid must lie in [0, 1]")
    if kind == "quantile" and (grid[0] <= 0 or grid[-1] >= 1):
        raise IncompatibleResponseError("probability grid must lie in (0, 1)")
    return grid


@dataclass(frozen=True, eq=False)
class ResponseObject:
    """A single Euclidean vector, grid curve or quantile curve."""

    kind: str
    values: np.ndarray
    grid: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise IncompatibleResponseError(f"unknown response kind {self.kind!r}")
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if values.ndim != 1:
            raise IncompatibleResponseError("a single response is one-dimensional")
        grid = _check_grid(self.kind, self.grid, values.size)
        if self.kind == "quantile" and np.any(np.diff(values) < 0):
            raise IncompatibleResponseError("quantile values must be nondecreasing")
        values.setflags(write=False)
        if grid is not None:
            grid.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "grid", grid)

    @classmethod
    def euclidean(cls, values):
        return cls("euclidean", values)

    @classmethod
    def curve(cls, grid, values):
        return cls("curve", values, grid)

    @classmethod
    def quantile(cls, grid, values):
        return cls("quantile", values, grid)


@dataclass(frozen=True, eq=False)
class ResponseSample:
    """``n`` responses of one kind stored as an ``(n, d)`` array.

    For curves and quantile functions every row is evaluated on the shared
    ``grid``.
    """

    kind: str
    values: np.ndarray
    grid: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise IncompatibleResponseError(f"unknown response kind {self.kind!r}")
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise IncompatibleResponseError("sample values must be a 2-d array")
        grid = _check_grid(self.kind, self.grid, values.shape[1])
        if self.kind == "quantile" and np.any(np.diff(values, axis=1) < 0):
            raise IncompatibleResponseError("quantile values must be nondecreasing")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "grid", grid)

    def __len__(self):
        return self.values.shape[0]

    def __getitem__(self, i) -> ResponseObject:
        return ResponseObject(self.kind, self.values[i], self.grid)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def take(self, idx) -> "ResponseSample":
        return ResponseSample(self.kind, self.values[np.asarray(idx)], self.grid)

    def weighted_values(self) -> np.ndarray:
        """Rows rescaled so the metric becomes a plain Euclidean distance."""
        if self.kind == "euclidean":
            return self.values
        return self.values * np.sqrt(quadrature_weights(self.grid))


SampleLike = Union[ResponseSample, Sequence[ResponseObject], np.ndarray]


def as_sample(items: SampleLike) -> ResponseSample:
    """Coerce a sample, a sequence of objects or a raw array to a sample.

    Raw arrays are read as Euclidean data with one row per item.
    """
    if isinstance(items, ResponseSample):
        return items
    if isinstance(items, ResponseObject):
        return ResponseSample(items.kind, items.values[None, :], items.grid)
    if isinstance(items, np.ndarray):
        return ResponseSample("euclidean", items)
    items = list(items)
    if not items:
        raise DegenerateDataError("empty sample")
    if not all(isinstance(it, ResponseObject) for it in items):
        return ResponseSample("euclidean", np.asarray(items, dtype=float))
    first = items[0]
    for it in items[1:]:
        _check_pair(it, first)
    return ResponseSample(first.kind, np.stack([it.values for it in items]), first.grid)


def _check_pair(a, b):
    if a.kind != b.kind:
        raise IncompatibleResponseError(f"cannot compare {a.kind} with {b.kind}")
    if a.values.shape[-1] != b.values.shape[-1]:
        raise IncompatibleResponseError("responses differ in dimension")
    if a.grid is not None and not np.array_equal(a.grid, b.grid):
        raise IncompatibleResponseError("responses live on different grids")


def _check_metric(metric, kind):
    if metric not in METRICS:
        raise IncompatibleResponseError(f"unknown metric {metric!r}")
    if METRIC_FOR_KIND[kind] != metric:
        raise IncompatibleResponseError(f"metric {metric} does not apply to {kind} responses")


def metric_distance(metric: str, a: ResponseObject, b: ResponseObject) -> float:
    """Distance between two responses under ``metric``.

    ``functional_l2`` and ``wasserstein2`` are the L2 distance between the
    two grid functions (for quantile functions this is the 2-Wasserstein
    distance between the underlying distributions).
    """
    _check_pair(a, b)
    _check_metric(metric, a.kind)
    diff = a.values - b.values
    if a.kind == "euclidean":
        return float(np.sqrt(diff @ diff))
    return float(np.sqrt(quadrature_weights(a.grid) @ diff**2))


def pairwise_sq_distances(metric: str, A: SampleLike, B: SampleLike | None = None) -> np.ndarray:
    """Matrix of squared distances between the rows of two samples."""
    A = as_sample(A)
    B = A if B is None else as_sample(B)
    _check_pair(A, B)
    _check_metric(metric, A.kind)
    return cdist(A.weighted_values(), B.weighted_values(), "sqeuclidean")


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel ``exp(-gamma * d(a, b)**2)`` over a base metric."""

    metric: str
    gamma: float

    def __post_init__(self):
        if self.metric not in METRICS:
            raise IncompatibleResponseError(f"unknown metric {self.metric!r}")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        object.__setattr__(self, "gamma", float(self.gamma))


def kernel_eval(spec: KernelSpec, a: ResponseObject, b: ResponseObject) -> float:
    d = metric_distance(spec.metric, a, b)
    return float(np.exp(-spec.gamma * d * d))


def cross_gram(spec: KernelSpec, A: SampleLike, B: SampleLike) -> np.ndarray:
    """Kernel matrix with entry ``(i, j) = k(A[i], B[j])``."""
    return np.exp(-spec.gamma * pairwise_sq_distances(spec.metric, A, B))


def gram_matrix(spec: KernelSpec, items: SampleLike) -> np.ndarray:
    items = as_sample(items)
    if len(items) == 0:
        raise DegenerateDataError("gram matrix of an empty sample")
    K = np.exp(-spec.gamma * pairwise_sq_distances(spec.metric, items))
    # cdist is exactly symmetric with a zero diagonal; enforce it anyway
    K = (K + K.T) / 2
    np.fill_diagonal(K, 1.0)
    return K


def median_heuristic_gamma(metric: str, items: SampleLike) -> float:
    """``1 / (2 * median**2)`` over all nonzero pairwise distances."""
    items = as_sample(items)
    _check_metric(metric, items.kind)
    if len(items) < 2:
        raise DegenerateDataError("median heuristic needs at least two items")
    d = pdist(items.weighted_values(), "euclidean")
    d = d[d > 0]
    if d.size == 0:
        raise DegenerateDataError("all pairwise distances are zero")
    med = float(np.median(d))
    return 1.0 / (2.0 * med * med)


def resolve_kernel(metric: str, gamma, items: SampleLike) -> KernelSpec:
    """Build a kernel, choosing gamma by the median heuristic when asked."""
    if gamma is None or gamma == "median":
        gamma = median_heuristic_gamma(metric, items)
    return KernelSpec(metric, float(gamma))
