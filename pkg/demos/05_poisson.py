"""
Poisson's equation by Feynman-Kac and by finite differences
===========================================================
"""

# %%
from varexp_sde import remark1_exponent
from varexp_sde.fk_poisson import (PoissonProblem, cross_validate, fd_convergence, fd_solve,
                                   fk_solve, parse_source)

h = remark1_exponent()
prob = PoissonProblem(1.0, 2.0, 1.0, parse_source("const:1"), 1.0, 1.0, h, h)

# %%
# The deterministic solver and its order
# --------------------------------------
fd = fd_solve(prob, 2048)
print("u(1.5) =", float(fd(1.5)), "residual", fd.residual)
for n in (64, 128, 256):
    print(fd_convergence(prob, n).to_dict())

# %%
# Monte Carlo at one point
# ------------------------
est = fk_solve(prob, 1.5, 1e-3, 20_000, seed=1)
print(est.to_dict())

# %%
# Side by side, with a calibrated time-step allowance
# ---------------------------------------------------
rep = cross_validate(prob, [1.25, 1.5, 1.75], 1e-3, 20_000, 2048, seed=1)
for p in rep.probes:
    print(f"x={p.probe}: fk {p.fk_mean:.5f} +- {p.fk_se:.5f}  fd {p.fd_value:.5f}  "
          f"allowance {p.allowance:.5f}  pass={p.passed}")
