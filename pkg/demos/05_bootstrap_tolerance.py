# %% [markdown]
# # Tolerance regions with a confidence statement
#
# The conformal threshold controls coverage on average over calibration
# draws. For a statement of the form "the region holds at least 90% of the
# conditional mass with 90% confidence" we bootstrap the calibration scores
# and take a lower quantile of the resampled thresholds.

# %%
import numpy as np

from kmedepth import (ScenarioConfig, SplitPlan, bootstrap_tolerance_threshold, fit_homoscedastic_region,
                      generate)

contents, conformal = [], []
for rep in range(20):
    data = generate(ScenarioConfig("euclid_homo", n=1000, seed=rep))
    model = fit_homoscedastic_region(data, SplitPlan(seed=100 + rep))
    res = bootstrap_tolerance_threshold(model, 0.1, 0.9, 300, seed=200 + rep)
    test = generate(ScenarioConfig("euclid_homo", n=10000, seed=300 + rep))
    scores = model.score(test.X, test.Y)
    contents.append(np.mean(scores >= res.threshold))
    conformal.append(np.mean(scores >= model.threshold(0.1)))

# %%
contents, conformal = np.array(contents), np.array(conformal)
print(f"bootstrap threshold: content >= 0.9 in {np.mean(contents >= 0.9):.2f} of runs")
print(f"conformal threshold: content >= 0.9 in {np.mean(conformal >= 0.9):.2f} of runs")
