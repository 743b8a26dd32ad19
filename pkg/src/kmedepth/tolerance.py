"""Unconditional tolerance regions from depth spacings.

A sample of ``n`` responses is ranked by its own empirical kernel depth.
The region made of the ``r`` innermost depth spacings,
``{y : D(y) >= D^(r)}`` with ``D^(r)`` the r-th largest sample depth, has
probability content distributed as ``Beta(r, n + 1 - r)`` when the depth
is the population one; ``r = ceil((n + 1) * content)`` makes its expected
content approximately ``content``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from .embedding import empirical_depth
from .errors import DataError
from .kernel import KernelSpec, ResponseObject, ResponseSample, SampleLike, as_sample

DepthFunction = Callable[[ResponseSample], np.ndarray]


def expectation_rank(n: int, content: float) -> int:
    """``min(n, max(1, ceil((n + 1) * content)))``."""
    if not 0.0 < content < 1.0:
        raise ValueError(f"content must lie in (0, 1), got {content}")
    # 1e-9 absorbs representation error, e.g. 20 * 0.9
    r = math.ceil((n + 1) * content - 1e-9)
    return min(n, max(1, r))


@dataclass(frozen=True, eq=False)
class DepthRegion:
    refs: ResponseSample
    k_y: KernelSpec | None
    threshold: float
    rank: int
    depth_fn: DepthFunction | None = None

    def depth(self, y: SampleLike) -> np.ndarray:
        y = as_sample(y)
        if self.depth_fn is not None:
            return np.asarray(self.depth_fn(y), dtype=float)
        return empirical_depth(self.refs, self.k_y, y)

    def contains(self, y: SampleLike) -> np.ndarray:
        return self.depth(y) >= self.threshold


def expectation_tolerance_region(ys: SampleLike, k_y: KernelSpec | None, content: float,
                                 depth_fn: DepthFunction | None = None) -> DepthRegion:
    """Expectation tolerance region with target content ``content``.

    ``depth_fn`` replaces the empirical kernel depth (for instance by a
    known population depth); it maps a sample to an array of depths.
    """
    refs = as_sample(ys)
    n = len(refs)
    if n < 2:
        raise DataError("a tolerance region needs at least two observations")
    r = expectation_rank(n, content)
    if depth_fn is None:
        depths = empirical_depth(refs, k_y, refs)
    else:
        depths = np.asarray(depth_fn(refs), dtype=float)
    tau = float(np.sort(depths)[::-1][r - 1])
    return DepthRegion(refs, k_y, tau, r, depth_fn)


def region_contains_unconditional(region: DepthRegion, y: ResponseObject) -> bool:
    return bool(region.contains(as_sample(y))[0])


def content_distribution(n: int, r: int):
    """Law of the probability content of the r-spacing region."""
    return stats.beta(r, n + 1 - r)


def gaussian_kernel_population_depth(y, gamma: float) -> np.ndarray:
    """``E exp(-gamma (y - Y)^2)`` for ``Y ~ N(0, 1)``."""
    y = np.asarray(y, dtype=float)
    s = 1.0 + 2.0 * gamma
    return np.exp(-gamma * y**2 / s) / np.sqrt(s)
