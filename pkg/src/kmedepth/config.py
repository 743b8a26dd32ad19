"""Run configuration: a YAML document validated against a fixed schema.

Unknown keys are rejected at every level.  Defaults are resolved at
parse time; data-dependent defaults stay symbolic (``lambda: auto`` is
``1e-3`` times the fitting-split size, ``gamma: median`` is the median
heuristic on the fitting split).
"""

from __future__ import annotations

import hashlib
import json
from typing import List, Literal, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError

COMMANDS = ("simulate", "fit", "coverage", "tolerance", "anomaly", "experiment")
Kind = Literal["euclidean", "curve", "quantile"]
Metric = Literal["euclidean_l2", "functional_l2", "wasserstein2"]
Gamma = Union[Literal["median"], float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class KernelConfig(_Strict):
    x_metric: Optional[Metric] = None
    y_metric: Optional[Metric] = None
    x_gamma: Gamma = "median"
    y_gamma: Gamma = "median"

    @field_validator("x_gamma", "y_gamma")
    @classmethod
    def _positive(cls, v):
        if v != "median" and not v > 0:
            raise ValueError("gamma must be positive or 'median'")
        return v


class SplitConfig(_Strict):
    fractions: Optional[Tuple[float, float, float]] = None
    seed: Optional[int] = Field(default=None, ge=0)


class CdfConfig(_Strict):
    estimator: Literal["knn", "beta"] = "knn"
    k: Union[Literal["auto"], int] = "auto"
    clamp: float = Field(default=1e-3, gt=0, lt=0.01)

    @field_validator("k")
    @classmethod
    def _k_positive(cls, v):
        if v != "auto" and v < 1:
            raise ValueError("k must be a positive integer or 'auto'")
        return v


class ScenarioSection(_Strict):
    name: Literal["euclid_homo", "euclid_hetero", "functional", "distributional",
                  "three_profiles"] = "euclid_homo"
    n: int = Field(default=2000, ge=1)
    p: int = Field(default=2, ge=1)
    m: int = Field(default=1, ge=1)
    rho: float = Field(default=0.5, ge=0, le=1)
    grid_size: Optional[int] = Field(default=None, ge=2)
    noise: bool = True
    profile_x: Tuple[float, float] = (0.5, 0.25)
    profile_shift: float = 3.0


class DataConfig(_Strict):
    train: Optional[str] = None
    test: Optional[str] = None
    query: Optional[str] = None
    predictor: Optional[Kind] = None
    response: Optional[Kind] = None


class BootstrapConfig(_Strict):
    B: int = Field(default=500, ge=100)
    gamma: float = Field(default=0.9, gt=0, lt=1)
    refit: bool = False


class ExperimentConfig(_Strict):
    scenarios: List[Literal["euclid_homo", "euclid_hetero", "functional", "distributional"]] = \
        ["euclid_homo"]
    n: List[int] = [2000]
    p: List[int] = [2]
    m: List[int] = [1]
    rho: List[float] = [0.5]
    grid_size: Optional[int] = Field(default=None, ge=2)
    reps: int = Field(default=100, ge=1)
    test_size: int = Field(default=2000, ge=1)
    length_points: int = Field(default=0, ge=0)


class RunConfig(_Strict):
    command: Optional[Literal[COMMANDS]] = None
    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1)
    out: Optional[str] = None
    model: Optional[str] = None
    mode: Literal["homoscedastic", "heteroscedastic"] = "homoscedastic"
    lambda_: Union[Literal["auto"], float] = Field(default="auto", alias="lambda")
    alpha: List[float] = [0.05]
    kernel: KernelConfig = KernelConfig()
    split: SplitConfig = SplitConfig()
    cdf: CdfConfig = CdfConfig()
    scenario: ScenarioSection = ScenarioSection()
    data: DataConfig = DataConfig()
    bootstrap: BootstrapConfig = BootstrapConfig()
    experiment: ExperimentConfig = ExperimentConfig()

    @field_validator("lambda_")
    @classmethod
    def _lambda_nonnegative(cls, v):
        if v != "auto" and v < 0:
            raise ValueError("lambda must be nonnegative or 'auto'")
        return v

    @field_validator("alpha")
    @classmethod
    def _alphas(cls, v):
        if not v or any(not 0 < a < 1 for a in v):
            raise ValueError("every alpha must lie in (0, 1)")
        return v

    @model_validator(mode="after")
    def _split_matches_mode(self):
        f = self.split.fractions
        if f is not None:
            if any(x < 0 for x in f) or abs(sum(f) - 1) > 1e-9:
                raise ValueError("split.fractions must be nonnegative and sum to 1")
            if (self.mode == "homoscedastic") != (f[2] == 0):
                raise ValueError("split.fractions third entry must be 0 exactly in homoscedastic mode")
        return self

    @property
    def lam(self) -> float | None:
        return None if self.lambda_ == "auto" else float(self.lambda_)

    def to_dict(self) -> dict:
        return self.model_dump(mode="json", by_alias=True)

    def hash(self) -> str:
        """Digest of the resolved config, ignoring thread count and output path."""
        doc = self.to_dict()
        doc.pop("threads")
        doc.pop("out")
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _format_errors(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join("lambda" if p == "lambda_" else str(p) for p in err["loc"])
        parts.append(f"{loc or '<root>'}: {err['msg']}")
    return "; ".join(parts)


def validate_config(doc: dict | None) -> RunConfig:
    try:
        return RunConfig.model_validate(doc or {})
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML config document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if doc is not None and not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    return validate_config(doc)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
