"""Coverage, region length and the replicated coverage experiment."""

from __future__ import annotations

import csv
import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .conformal import (HETEROSCEDASTIC_PLAN, HOMOSCEDASTIC_PLAN, PredictionModel, SplitPlan,
                        fit_region)
from .errors import DataError, KmeDepthError
from .kernel import ResponseSample, as_sample
from .simulate import ScenarioConfig, derive_seed, generate

REPORT_VERSION = 1


def marginal_coverage(model: PredictionModel, alpha: float, test) -> float:
    """Fraction of test pairs falling inside the region at ``alpha``."""
    if len(test) == 0:
        raise DataError("empty test sample")
    return float(np.mean(model.contains(alpha, test.X, test.Y)))


def _scalar_training_response(model):
    Y = model.ckme.Y
    if Y.kind != "euclidean" or Y.dim != 1:
        raise DataError("region length is defined for scalar responses only")
    return Y.values[:, 0]


def default_bounds(model: PredictionModel) -> tuple[float, float]:
    y = _scalar_training_response(model)
    return float(y.min() - 5.0), float(y.max() + 5.0)


def region_length_1d(model: PredictionModel, alpha: float, x, bounds=None,
                     resolution: int = 2001) -> float:
    """Length of the region at ``x``: grid step times the number of grid points inside."""
    _scalar_training_response(model)
    if resolution < 101:
        raise ValueError("resolution must be at least 101")
    lo, hi = default_bounds(model) if bounds is None else map(float, bounds)
    if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
        raise ValueError("bounds must be finite and increasing")
    grid = np.linspace(lo, hi, resolution)
    inside = model.score_at(as_sample(x), grid[:, None]) >= model.threshold(alpha)
    return float(inside.sum() * (hi - lo) / (resolution - 1))


@dataclass(frozen=True)
class LengthProfile:
    points: np.ndarray
    percentiles: tuple
    lengths: np.ndarray

    @property
    def spread(self) -> float:
        return float(self.lengths.max() - self.lengths.min())

    @property
    def mean(self) -> float:
        return float(self.lengths.mean())


def length_stability_profile(model: PredictionModel, alpha: float, percentiles=(20, 80),
                             X_ref=None, **length_kw) -> LengthProfile:
    """Region lengths at every combination of per-coordinate predictor percentiles.

    Percentiles are taken over ``X_ref`` (default: the embedding's
    training predictors).
    """
    X = (model.ckme.X if X_ref is None else as_sample(X_ref)).values
    p = X.shape[1]
    if p not in (1, 2):
        raise DataError("length profiles are defined for one or two predictors")
    levels = np.percentile(X, percentiles, axis=0)  # (len(percentiles), p)
    combos = list(itertools.product(range(len(percentiles)), repeat=p))
    points = np.array([[levels[c[j], j] for j in range(p)] for c in combos])
    pcts = tuple(tuple(percentiles[i] for i in c) for c in combos)
    lengths = np.array([region_length_1d(model, alpha, pt[None, :], **length_kw) for pt in points])
    return LengthProfile(points, pcts, lengths)


# --- replicated experiments ---------------------------------------------------

ROW_FIELDS = ("scenario", "n", "p", "m", "rho", "grid_size", "mode", "alpha", "rep",
              "seed", "coverage", "mean_length", "error")
SUMMARY_FIELDS = ("scenario", "n", "p", "m", "rho", "grid_size", "mode", "alpha", "reps",
                  "failed", "coverage_mean", "coverage_sd", "coverage_min", "coverage_max",
                  "length_mean")


def mode_for(scenario: str) -> str:
    return "heteroscedastic" if scenario == "euclid_hetero" else "homoscedastic"


@dataclass
class CoverageReport:
    """Per-replication coverage rows plus a summary per scenario and ``alpha``."""

    rows: list
    meta: dict = field(default_factory=dict)

    def summary(self) -> list:
        keys = SUMMARY_FIELDS[:8]
        groups: dict = {}
        for row in self.rows:
            groups.setdefault(tuple(row[k] for k in keys), []).append(row)
        out = []
        for key, rows in groups.items():
            cov = np.array([r["coverage"] for r in rows if not r["error"]], dtype=float)
            lens = np.array([r["mean_length"] for r in rows
                             if not r["error"] and r["mean_length"] is not None], dtype=float)
            ok = cov.size > 0
            out.append(dict(zip(keys, key),
                            reps=len(rows), failed=len(rows) - cov.size,
                            coverage_mean=float(cov.mean()) if ok else None,
                            coverage_sd=float(cov.std(ddof=1)) if cov.size > 1 else None,
                            coverage_min=float(cov.min()) if ok else None,
                            coverage_max=float(cov.max()) if ok else None,
                            length_mean=float(lens.mean()) if lens.size else None))
        return out

    def coverages(self, **match) -> np.ndarray:
        return np.array([r["coverage"] for r in self.rows
                         if not r["error"] and all(r[k] == v for k, v in match.items())])

    def header_line(self) -> str:
        items = " ".join(f"{k}={self.meta[k]}" for k in sorted(self.meta))
        return f"# kmedepth-report version={REPORT_VERSION} {items}".rstrip()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.header_line() + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(ROW_FIELDS)
            for row in self.rows:
                w.writerow([_fmt(row[k]) for k in ROW_FIELDS])

    def write_json(self, path) -> None:
        doc = {"version": REPORT_VERSION, "config_hash": self.meta.get("config_hash", "none")}
        doc.update({k: v for k, v in self.meta.items() if k != "config_hash"})
        doc["summary"] = self.summary()
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _run_rep(scn: ScenarioConfig, alphas, rep, seed, test_size, fit_kw, length_points):
    data_seed = derive_seed(seed, "data", rep)
    base = dict(scenario=scn.scenario, n=scn.n, p=scn.p, m=scn.m, rho=scn.rho,
                grid_size=scn.resolved_grid_size, mode=mode_for(scn.scenario), rep=rep,
                seed=data_seed)
    try:
        train = generate(scn.with_seed(data_seed))
        test = generate(replace(scn, n=test_size, seed=derive_seed(seed, "test", rep)))
        mode = base["mode"]
        kw = dict(fit_kw)
        fractions = kw.pop("fractions", None) or (
            HETEROSCEDASTIC_PLAN if mode == "heteroscedastic" else HOMOSCEDASTIC_PLAN)
        plan = SplitPlan(fractions, derive_seed(seed, "split", rep))
        model = fit_region(train, mode, plan, **kw)
        scores = model.score(test.X, test.Y)
        rows = []
        for a in alphas:
            cov = float(np.mean(scores >= model.threshold(a)))
            length = None
            if length_points and test.Y.kind == "euclidean" and test.Y.dim == 1:
                xs = test.X.take(np.arange(min(length_points, len(test))))
                length = float(np.mean([region_length_1d(model, a, xs.take([i]))
                                        for i in range(len(xs))]))
            rows.append(dict(base, alpha=a, coverage=cov, mean_length=length, error=""))
        return rows
    except (KmeDepthError, np.linalg.LinAlgError, ValueError) as exc:
        msg = f"{type(exc).__name__}: {exc}".replace("\n", " ")
        return [dict(base, alpha=a, coverage=None, mean_length=None, error=msg) for a in alphas]


def coverage_experiment(scenarios, alphas, reps: int = 100, seed: int = 0,
                        test_size: int = 2000, n_jobs: int = 1, length_points: int = 0,
                        meta: dict | None = None, **fit_kw) -> CoverageReport:
    """Replicated fit-and-evaluate runs over scenarios and miscoverage levels.

    Each replication draws fresh training and test samples from seeds
    derived from ``(seed, rep)``, fits once, and measures coverage at every
    ``alpha``; for scalar responses the mean region length over the first
    ``length_points`` test predictors is recorded too.  Rows come out in
    (scenario, rep, alpha) order whatever ``n_jobs`` is.  Remaining keyword
    arguments go to :func:`kmedepth.conformal.fit_region` (``fractions``
    overrides the split plan).
    """
    scenarios = [scenarios] if isinstance(scenarios, ScenarioConfig) else list(scenarios)
    alphas = [float(a) for a in alphas]
    tasks = [(scn, rep) for scn in scenarios for rep in range(reps)]

    def work(task):
        scn, rep = task
        return _run_rep(scn, alphas, rep, seed, test_size, fit_kw, length_points)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(work, tasks))
    else:
        results = [work(t) for t in tasks]
    rows = [row for res in results for row in res]
    info = dict(reps=reps, seed=seed, test_size=test_size)
    info.update(meta or {})
    return CoverageReport(rows, info)
