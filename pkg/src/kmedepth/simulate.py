"""Seeded generators for the simulation scenarios.

Randomness
----------
All draws come from numpy's PCG64 bit generator.  A stream is identified
by ``(seed, tag, index)``: the tag string is reduced to an integer with
CRC-32 and the triple is fed to :class:`numpy.random.SeedSequence`.
Gaussian variates use :meth:`numpy.random.Generator.standard_normal`
(ziggurat), uniforms :meth:`~numpy.random.Generator.random`.  Both are
platform independent for a fixed numpy major version, so a scenario
config plus seed determines its sample bit for bit.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import eval_legendre

from .errors import ConfigError
from .kernel import ResponseSample, quadrature_weights

SCENARIOS = ("euclid_homo", "euclid_hetero", "functional", "distributional")


def substream(seed: int, tag: str, index: int = 0) -> np.random.Generator:
    """Independent generator for ``(seed, tag, index)``."""
    if seed < 0 or index < 0:
        raise ConfigError("seeds and stream indices must be nonnegative")
    ss = np.random.SeedSequence([int(seed), zlib.crc32(tag.encode()), int(index)])
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, tag: str, index: int = 0) -> int:
    """A 63-bit child seed, for handing to code that takes a plain integer."""
    return int(substream(seed, tag, index).integers(0, 2**63 - 1))


@dataclass(frozen=True)
class PairedSample:
    """Predictors, responses and optional survey weights for ``n`` units."""

    X: ResponseSample
    Y: ResponseSample
    weights: np.ndarray | None = None

    def __post_init__(self):
        if len(self.X) != len(self.Y):
            raise ValueError("predictor and response samples differ in length")
        if self.weights is not None and len(self.weights) != len(self.X):
            raise ValueError("weights length does not match the sample")

    def __len__(self):
        return len(self.X)

    def take(self, idx) -> "PairedSample":
        idx = np.asarray(idx, dtype=int)
        w = None if self.weights is None else np.asarray(self.weights)[idx]
        return PairedSample(self.X.take(idx), self.Y.take(idx), w)


@dataclass(frozen=True)
class ScenarioConfig:
    """Parameters of one simulation scenario.

    ``p`` and ``m`` are predictor and response dimensions for the Euclidean
    scenarios; ``grid_size`` is the number of grid points for curves and
    quantile functions.  ``noise=False`` switches off the error term.
    """

    scenario: str = "euclid_homo"
    n: int = 2000
    p: int = 2
    m: int = 1
    rho: float = 0.5
    grid_size: int | None = None
    seed: int = 0
    noise: bool = True

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.n < 1:
            raise ConfigError("n must be positive")
        if self.p < 1 or self.m < 1:
            raise ConfigError("p and m must be positive")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigError("rho must lie in [0, 1]")
        if self.scenario == "functional" and self.resolved_grid_size < 20:
            raise ConfigError("functional scenario needs at least 20 grid points")
        if self.scenario == "distributional" and self.resolved_grid_size < 2:
            raise ConfigError("distributional scenario needs at least 2 grid points")

    @property
    def resolved_grid_size(self) -> int:
        if self.grid_size is not None:
            return self.grid_size
        return 99 if self.scenario == "distributional" else 100

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=seed)


def equicorrelation(p: int, rho: float) -> np.ndarray:
    return np.full((p, p), rho) + (1.0 - rho) * np.eye(p)


def curve_grid(size: int = 100) -> np.ndarray:
    return np.linspace(0.0, 1.0, size)


def probability_grid(size: int = 99) -> np.ndarray:
    """``size`` equispaced interior probabilities, e.g. 0.01..0.99 for 99."""
    return np.arange(1, size + 1) / (size + 1)


# --- Euclidean ---------------------------------------------------------------

def _covariance_root(S):
    """Cholesky factor, or a symmetric square root when ``S`` is singular (rho = 1)."""
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        s, V = np.linalg.eigh(S)
        return V * np.sqrt(np.clip(s, 0.0, None))


def _gaussian_predictors(rng, n, p, rho):
    L = _covariance_root(equicorrelation(p, rho))
    return rng.standard_normal((n, p)) @ L.T


def euclid_response(X, eps, heteroscedastic=False):
    """``Y = X beta + s(X) eps`` with an all-ones ``beta``.

    ``s(X)`` is 1, or the Euclidean norm of ``X`` in the heteroscedastic
    case.
    """
    X = np.atleast_2d(X)
    eps = np.atleast_2d(eps)
    mean = np.repeat(X.sum(axis=1, keepdims=True), eps.shape[1], axis=1)
    if heteroscedastic:
        eps = np.linalg.norm(X, axis=1, keepdims=True) * eps
    return mean + eps


def _gen_euclid(cfg, heteroscedastic):
    rng = substream(cfg.seed, cfg.scenario)
    X = _gaussian_predictors(rng, cfg.n, cfg.p, cfg.rho)
    eps = rng.standard_normal((cfg.n, cfg.m))
    if not cfg.noise:
        eps = np.zeros_like(eps)
    Y = euclid_response(X, eps, heteroscedastic)
    return PairedSample(ResponseSample("euclidean", X), ResponseSample("euclidean", Y))


def gen_euclid_homo(cfg: ScenarioConfig) -> PairedSample:
    """Gaussian linear model with unit-variance isotropic noise."""
    return _gen_euclid(cfg, heteroscedastic=False)


def gen_euclid_hetero(cfg: ScenarioConfig) -> PairedSample:
    """Gaussian linear model with noise scaled by ``||X||_2``."""
    return _gen_euclid(cfg, heteroscedastic=True)


# --- functional --------------------------------------------------------------

N_BASIS = 10
FUNCTIONAL_NOISE_SD = (0.5, 0.75)


def legendre_basis(grid, n_basis: int = N_BASIS) -> np.ndarray:
    """Orthonormal shifted Legendre polynomials on [0, 1], one per column."""
    t = np.asarray(grid, dtype=float)
    return np.column_stack([np.sqrt(2 * k + 1) * eval_legendre(k, 2 * t - 1)
                            for k in range(n_basis)])


def score_variances(n_basis: int = N_BASIS) -> np.ndarray:
    k = np.arange(1, n_basis + 1)
    return (n_basis - k + 1).astype(float)


def functional_response(Xcurves, grid, eps1, eps2):
    """``Y(t) = sin(pi t) + 5 t int s X(s) ds + cos(2 pi t) e1 + sin(2 pi t) e2``.

    The integral is the trapezoid rule over ``grid``.
    """
    t = np.asarray(grid, dtype=float)
    Xcurves = np.atleast_2d(Xcurves)
    w = quadrature_weights(t)
    inner = Xcurves @ (w * t)
    eps1 = np.asarray(eps1, dtype=float).reshape(-1, 1)
    eps2 = np.asarray(eps2, dtype=float).reshape(-1, 1)
    return (np.sin(np.pi * t)[None, :] + 5.0 * inner[:, None] * t[None, :]
            + eps1 * np.cos(2 * np.pi * t) + eps2 * np.sin(2 * np.pi * t))


def gen_functional(cfg: ScenarioConfig) -> PairedSample:
    """Functional-to-functional linear model on a uniform grid of [0, 1]."""
    rng = substream(cfg.seed, cfg.scenario)
    t = curve_grid(cfg.resolved_grid_size)
    scores = rng.standard_normal((cfg.n, N_BASIS)) * np.sqrt(score_variances())
    X = scores @ legendre_basis(t).T
    e = rng.standard_normal((cfg.n, 2)) * np.asarray(FUNCTIONAL_NOISE_SD)
    if not cfg.noise:
        e = np.zeros_like(e)
    Y = functional_response(X, t, e[:, 0], e[:, 1])
    return PairedSample(ResponseSample("curve", X, t), ResponseSample("curve", Y, t))


# --- distributional ----------------------------------------------------------

DISTRIBUTIONAL_NOISE_SD = 0.9


def distributional_response(X, eps, grid):
    """Quantile curves ``Q(p) = 10 p + X1 (1 + p) + X2 p^2 + eps``."""
    p = np.asarray(grid, dtype=float)
    X = np.atleast_2d(X)
    eps = np.asarray(eps, dtype=float).reshape(-1, 1)
    return 10 * p + X[:, [0]] * (1 + p) + X[:, [1]] * p**2 + eps


def gen_distributional(cfg: ScenarioConfig) -> PairedSample:
    """Scalar-on-distribution model returning quantile curves."""
    rng = substream(cfg.seed, cfg.scenario)
    p = probability_grid(cfg.resolved_grid_size)
    u = rng.random((cfg.n, 2))
    X = u * np.array([1.0, 0.5])
    eps = rng.standard_normal(cfg.n) * DISTRIBUTIONAL_NOISE_SD
    if not cfg.noise:
        eps = np.zeros_like(eps)
    Q = distributional_response(X, eps, p)
    return PairedSample(ResponseSample("euclidean", X), ResponseSample("quantile", Q, p))


def three_profile_demo(x=(0.5, 0.25), shift: float = 3.0, grid_size: int = 99) -> PairedSample:
    """Three quantile profiles sharing the predictor ``x``.

    Row 0 sits ``shift`` above the noiseless conditional profile (more
    active than expected), row 1 on it, row 2 ``shift`` below it.
    """
    p = probability_grid(grid_size)
    x = np.asarray(x, dtype=float).reshape(1, 2)
    centre = distributional_response(x, 0.0, p)[0]
    Q = np.stack([centre + shift, centre, centre - shift])
    return PairedSample(ResponseSample("euclidean", np.repeat(x, 3, axis=0)),
                        ResponseSample("quantile", Q, p))


GENERATORS = {
    "euclid_homo": gen_euclid_homo,
    "euclid_hetero": gen_euclid_hetero,
    "functional": gen_functional,
    "distributional": gen_distributional,
}


def generate(cfg: ScenarioConfig) -> PairedSample:
    return GENERATORS[cfg.scenario](cfg)
