# %% [markdown]
# # Conditional depth regions with a constant-shape noise model
#
# Responses are Y = sum(X) + noise with equicorrelated Gaussian predictors.
# We fit the kernel conditional embedding on one half of the data, calibrate
# the depth threshold on the other half, and check marginal coverage on
# fresh draws.

# %%
import numpy as np

from kmedepth import (ScenarioConfig, SplitPlan, coverage_experiment, fit_homoscedastic_region,
                      generate, length_stability_profile, marginal_coverage)

train = generate(ScenarioConfig("euclid_homo", n=1000, p=2, seed=0))
model = fit_homoscedastic_region(train, SplitPlan(seed=1))
print("calibration size", model.m)

# %% [markdown]
# Coverage at a few levels on 5000 new points. It should track 1 - alpha.

# %%
test = generate(ScenarioConfig("euclid_homo", n=5000, p=2, seed=2))
for alpha in (0.2, 0.1, 0.05):
    print(f"alpha={alpha:<5} coverage={marginal_coverage(model, alpha, test):.3f}")

# %% [markdown]
# The region for a scalar response is an interval. Its length at the 20th and
# 80th percentile predictor values stays near the Gaussian value 2 * 1.645.

# %%
prof = length_stability_profile(model, 0.1)
for x, length in zip(prof.points, prof.lengths):
    print(np.round(x, 2), f"{length:.3f}")
print(f"spread {prof.spread:.3f}")

# %% [markdown]
# A small repeated experiment: mean and spread of coverage over 20 replicates.

# %%
rep = coverage_experiment(ScenarioConfig("euclid_homo", n=600), [0.1], reps=20, seed=3)
s = rep.summary()[0]
print(f"mean coverage {s['coverage_mean']:.3f}  sd {s['coverage_sd']:.3f}")
