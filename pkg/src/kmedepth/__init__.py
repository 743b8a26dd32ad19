"""Kernel mean embedding depths and conformal prediction regions.

Works with Euclidean vectors, curves on a common grid and quantile
functions (distributions) as predictors or responses.
"""

from .conddist import (BetaGamlssModel, KnnCdfModel, beta_cdf_eval, fit_beta_cdf_model,
                       fit_knn_cdf_model, knn_cdf_eval)
from .conformal import (HETEROSCEDASTIC_PLAN, HOMOSCEDASTIC_PLAN, BootstrapThreshold,
                        PredictionModel, SplitPlan, anomaly_level, bootstrap_tolerance_threshold,
                        fit_heteroscedastic_region, fit_homoscedastic_region, fit_region,
                        region_contains, split_dataset)
from .embedding import CkmeModel, ckme_coefficients, conditional_depth, empirical_depth, fit_ckme
from .errors import (ConfigError, DataError, DegenerateDataError, IncompatibleResponseError,
                     KmeDepthError, NumericalError)
from .evaluation import (CoverageReport, coverage_experiment, length_stability_profile,
                         marginal_coverage, region_length_1d)
from .kernel import (KernelSpec, ResponseObject, ResponseSample, as_sample, cross_gram,
                     gram_matrix, kernel_eval, median_heuristic_gamma, metric_distance)
from .simulate import PairedSample, ScenarioConfig, generate, substream, three_profile_demo
from .tolerance import DepthRegion, content_distribution, expectation_tolerance_region

__version__ = "0.1.0"
