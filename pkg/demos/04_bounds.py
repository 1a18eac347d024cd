"""
Moment, growth-rate and stability bounds
========================================

Each check is a Monte Carlo estimate with a 3-SE allowance against an
analytic bound.  The bounds are loose, and how loose is part of the story.
"""

# %%
from varexp_sde import ModelSpec, constant_coefficient, constant_exponent, remark1_exponent
from varexp_sde.analysis import verify_asymptotic, verify_moment_bound, verify_stability
from varexp_sde.simulate import PathGrid

one = constant_exponent(1.0)
gbm = ModelSpec(one, one, constant_coefficient(0.05), constant_coefficient(0.2), 1.0, 0.5)
r1 = remark1_exponent()
rem = ModelSpec(r1, r1, constant_coefficient(1.0), constant_coefficient(1.0), 1.0, 0.5)

# %%
# Moments
# -------
for name, model in [("gbm", gbm), ("remark1", rem)]:
    for m in (2, 3, 4):
        rep = verify_moment_bound(model, m, PathGrid(0, 0.5, 500), seed=5, n_paths=20_000)
        print(f"{name:8s} m={m} E X^m(T)={rep.empirical[-1]:9.4f} bound={rep.bound[-1]:.3g} "
              f"pass={rep.passed}")

# %%
# Long-run growth rate
# --------------------
rep = verify_asymptotic(gbm.with_horizon(50.0), 50.0, PathGrid(0, 50, 5000), seed=5,
                        n_paths=1000)
print(rep.quantiles, "K_hat", round(rep.K_hat, 4))
print("median log X(T)/T", round(rep.terminal_median, 4), "limit", rep.drift_limit)

# %%
# Stability in the start value
# ----------------------------
rep = verify_stability(rem.with_horizon(1.0), 2, 1.0, 1.01, PathGrid(0, 1, 1000), seed=5,
                       n_paths=5000)
print(rep.to_dict())
