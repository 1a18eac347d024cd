"""
Path simulation and strong convergence
======================================

GBM is the one case with an exact solution, so it anchors the schemes.
"""

# %%
import math

import numpy as np

from varexp_sde import ModelSpec, constant_coefficient, constant_exponent, remark1_exponent
from varexp_sde.simulate import (PathGrid, coupled_terminal_gap, running_sup_abs, simulate_batch,
                                 simulate_path, terminal)

one = constant_exponent(1.0)
gbm = ModelSpec(one, one, constant_coefficient(0.05), constant_coefficient(0.2), 1.0, 1.0)

# %%
# Moments against the closed form
# -------------------------------
est = simulate_batch(gbm, PathGrid.from_dt(0, 1, 1e-3), "euler", 7, 20_000,
                     [terminal(), terminal(2)])
for e, exact in zip(est, [math.exp(0.05), math.exp(0.14)]):
    print(f"{e.observable:8s} {e.mean:.5f} +- {e.std_error:.5f}   exact {exact:.5f}")

# %%
# Strong error of Euler and Milstein
# ----------------------------------
for scheme in ("euler", "milstein"):
    dts = [1e-1, 1e-2, 1e-3]
    errs = [coupled_terminal_gap(gbm, PathGrid.from_dt(0, 1, dt), 7, 5000, scheme).mean()
            for dt in dts]
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    print(f"{scheme:9s} errors {np.array(errs)}  slope {slope:.2f}")

# %%
# A nonlinear model
# -----------------
r1 = remark1_exponent()
m = ModelSpec(r1, r1, constant_coefficient(1.0), constant_coefficient(1.0), 1.0, 1.0)
path = simulate_path(m, PathGrid(0, 1, 1000), seed=3, path_index=0)
print(path.to_csv().splitlines()[:4])
est = simulate_batch(m, PathGrid(0, 1, 1000), "milstein", 3, 5000, [terminal(), running_sup_abs()])
print([f"{e.observable}: {e.mean:.4f}" for e in est])
