"""Command-line entry point.

Usage::

    kmedepth <simulate|fit|coverage|tolerance|anomaly|experiment>
             [--config FILE] [--seed N] [--out PATH] [--threads N] [--alpha A ...]

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
Failures print one JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import formats
from .conformal import (HETEROSCEDASTIC_PLAN, HOMOSCEDASTIC_PLAN, SplitPlan,
                        bootstrap_tolerance_threshold, fit_region)
from .config import COMMANDS, RunConfig, dump_config, parse_config, validate_config
from .errors import ConfigError, DataError, KmeDepthError, NumericalError
from .evaluation import coverage_experiment
from .kernel import METRIC_FOR_KIND, resolve_kernel
from .simulate import ScenarioConfig, derive_seed, generate, three_profile_demo


def _require(value, what):
    if value is None:
        raise ConfigError(f"{what} is required for this command")
    return value


def _out(cfg: RunConfig) -> Path:
    return Path(_require(cfg.out, "out"))


def _sidecar(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


def _write_json(path: Path, cfg: RunConfig, body: dict) -> None:
    doc = {"version": formats.FORMAT_VERSION, "config_hash": cfg.hash(), **body}
    path.write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n")


def _plan(cfg: RunConfig) -> SplitPlan:
    fractions = cfg.split.fractions or (
        HETEROSCEDASTIC_PLAN if cfg.mode == "heteroscedastic" else HOMOSCEDASTIC_PLAN)
    seed = cfg.split.seed if cfg.split.seed is not None else derive_seed(cfg.seed, "split")
    return SplitPlan(fractions, seed)


def _fit_kwargs(cfg: RunConfig) -> dict:
    kw = dict(x_gamma=cfg.kernel.x_gamma, y_gamma=cfg.kernel.y_gamma, lam=cfg.lam)
    if cfg.mode == "heteroscedastic":
        kw.update(cdf=cfg.cdf.estimator, k=None if cfg.cdf.k == "auto" else cfg.cdf.k,
                  clamp=cfg.cdf.clamp)
    return kw


def _kernel_overrides(cfg, data, plan):
    """Explicit kernels when the config names a metric other than the default."""
    from .conformal import split_dataset
    i1, _, _ = split_dataset(len(data), plan)
    out = {}
    for side, sample, metric, gamma in (("k_x", data.X, cfg.kernel.x_metric, cfg.kernel.x_gamma),
                                        ("k_y", data.Y, cfg.kernel.y_metric, cfg.kernel.y_gamma)):
        if metric is not None and metric != METRIC_FOR_KIND[sample.kind]:
            raise ConfigError(f"kernel metric {metric} does not match {sample.kind} data")
        out[side] = resolve_kernel(METRIC_FOR_KIND[sample.kind], gamma, sample.take(i1))
    return out


def _read(cfg: RunConfig, which: str):
    path = _require(getattr(cfg.data, which), f"data.{which}")
    return formats.read_dataset(path, cfg.data.predictor, cfg.data.response)


def _load_model(cfg: RunConfig):
    return formats.load_model(_require(cfg.model, "model"))


# --- subcommands --------------------------------------------------------------

def cmd_simulate(cfg: RunConfig) -> None:
    s = cfg.scenario
    if s.name == "three_profiles":
        data = three_profile_demo(s.profile_x, s.profile_shift, s.grid_size or 99)
    else:
        scn = ScenarioConfig(s.name, s.n, s.p, s.m, s.rho, s.grid_size, cfg.seed, s.noise)
        data = generate(scn)
    formats.write_dataset(_out(cfg), data, cfg.hash())


def cmd_fit(cfg: RunConfig) -> None:
    data = _read(cfg, "train")
    plan = _plan(cfg)
    kw = _fit_kwargs(cfg)
    kw.update(_kernel_overrides(cfg, data, plan))
    model = fit_region(data, cfg.mode, plan, **kw)
    formats.save_model(_out(cfg), model, cfg.hash())


def cmd_coverage(cfg: RunConfig) -> None:
    model = _load_model(cfg)
    test = _read(cfg, "test")
    out = _out(cfg)
    scores = model.score(test.X, test.Y)
    rows = []
    for a in cfg.alpha:
        thr = model.threshold(a)
        rows.append(dict(alpha=a, n_test=len(test), threshold=thr,
                         coverage=float(np.mean(scores >= thr))))
    with open(out, "w", newline="") as fh:
        fh.write(f"# kmedepth-coverage version={formats.FORMAT_VERSION} config_hash={cfg.hash()}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "n_test", "threshold", "coverage"])
        for r in rows:
            w.writerow([repr(r["alpha"]), r["n_test"], repr(r["threshold"]), repr(r["coverage"])])
    _write_json(_sidecar(out, ".summary.json"), cfg, {
        "mode": model.mode, "calibration_size": model.m,
        "coverage": [{"alpha": r["alpha"], "coverage": r["coverage"]} for r in rows]})


def cmd_tolerance(cfg: RunConfig) -> None:
    model = _load_model(cfg)
    data = _read(cfg, "train") if cfg.bootstrap.refit else None
    entries = []
    for i, a in enumerate(cfg.alpha):
        res = bootstrap_tolerance_threshold(model, a, cfg.bootstrap.gamma, cfg.bootstrap.B,
                                            derive_seed(cfg.seed, "tolerance", i), data)
        entries.append({
            "alpha": a, "content": 1 - a, "confidence": cfg.bootstrap.gamma,
            "threshold": res.threshold, "conformal_threshold": model.threshold(a),
            "replicate_min": float(res.replicates.min()),
            "replicate_max": float(res.replicates.max()),
            "degenerate_resamples": res.n_degenerate})
    for e in entries:
        for key in ("threshold", "conformal_threshold", "replicate_min", "replicate_max"):
            if not np.isfinite(e[key]):
                e[key] = None  # whole-space region
    _write_json(_out(cfg), cfg, {
        "region": {"mode": model.mode, "rule": "score(x, y) >= threshold",
                   "calibration_size": model.m, "bootstrap_resamples": cfg.bootstrap.B,
                   "refit": cfg.bootstrap.refit},
        "thresholds": entries})


def cmd_anomaly(cfg: RunConfig) -> None:
    model = _load_model(cfg)
    query = _read(cfg, "query")
    scores = model.score(query.X, query.Y)
    levels = model.anomaly(query.X, query.Y)
    with open(_out(cfg), "w", newline="") as fh:
        fh.write(f"# kmedepth-anomaly version={formats.FORMAT_VERSION} config_hash={cfg.hash()}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "score", "anomaly"] + [f"in_region_{a!r}" for a in cfg.alpha])
        for i in range(len(query)):
            inside = [int(scores[i] >= model.threshold(a)) for a in cfg.alpha]
            w.writerow([i, repr(float(scores[i])), repr(float(levels[i]))] + inside)


def cmd_experiment(cfg: RunConfig) -> None:
    e = cfg.experiment
    scenarios = [ScenarioConfig(s, n, p, m, rho, e.grid_size)
                 for s in e.scenarios for n in e.n for p in e.p for m in e.m for rho in e.rho]
    kw = dict(x_gamma=cfg.kernel.x_gamma, y_gamma=cfg.kernel.y_gamma, lam=cfg.lam,
              cdf=cfg.cdf.estimator, k=None if cfg.cdf.k == "auto" else cfg.cdf.k,
              clamp=cfg.cdf.clamp)
    report = coverage_experiment(scenarios, cfg.alpha, e.reps, cfg.seed, e.test_size,
                                 n_jobs=cfg.threads, length_points=e.length_points,
                                 meta={"config_hash": cfg.hash()}, **kw)
    out = _out(cfg)
    report.write_csv(out)
    report.write_json(_sidecar(out, ".summary.json"))


HANDLERS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "coverage": cmd_coverage,
    "tolerance": cmd_tolerance,
    "anomaly": cmd_anomaly,
    "experiment": cmd_experiment,
}


def run(cfg: RunConfig) -> int:
    """Execute ``cfg.command``; returns the process exit status."""
    stage = cfg.command or "dispatch"
    try:
        if cfg.command is None:
            raise ConfigError("no command given")
        HANDLERS[cfg.command](cfg)
        return 0
    except KmeDepthError as exc:
        return _fail(stage, exc, exc.exit_code)
    except OSError as exc:
        return _fail(stage, exc, DataError.exit_code)
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        return _fail(stage, exc, NumericalError.exit_code)


def _fail(stage, exc, code) -> int:
    record = {"error": type(exc).__name__, "stage": stage, "message": str(exc), "exit_code": code}
    print(json.dumps(record), file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kmedepth", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="YAML run configuration")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out")
    ap.add_argument("--threads", type=int)
    ap.add_argument("--alpha", type=float, action="append",
                    help="miscoverage level; repeat for several")
    ap.add_argument("--quiet", action="store_true", help="do not echo the resolved config")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = {}
        if args.config:
            cfg0 = parse_config(Path(args.config).read_text())
            doc = cfg0.to_dict()
        doc["command"] = args.command
        for key in ("seed", "out", "threads"):
            if getattr(args, key) is not None:
                doc[key] = getattr(args, key)
        if args.alpha:
            doc["alpha"] = args.alpha
        cfg = validate_config(doc)
    except ConfigError as exc:
        return _fail("config", exc, exc.exit_code)
    except OSError as exc:
        return _fail("config", exc, ConfigError.exit_code)
    if not args.quiet:
        sys.stdout.write(dump_config(cfg))
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
