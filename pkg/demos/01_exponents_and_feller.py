"""
Variable exponents: class-S checks and the boundary at zero
===========================================================

Validate a few exponent functions, certify the growth constant, and run
the Feller-type diagnostic on the Remark-1 model.
"""

# %%
# Which exponents belong to class S?
# ----------------------------------
import numpy as np

from varexp_sde import (ModelSpec, constant_coefficient, feller_diagnostic, growth_certificate,
                        parse_exponent, validate_class_s)

for spec in ["remark1", "constant:1", "rational:0.5/<1+x^2>", "constant:2"]:
    rep = validate_class_s(parse_exponent(spec))
    print(f"{spec:22s} pass={rep.passed!s:5s} failed={rep.failed()}")

# %%
# Growth constant
# ---------------
# ``x^h(x) <= K (1 + x)`` holds on the certification grid.
h = parse_exponent("remark1")
cert = growth_certificate(h)
print(f"K = {cert.K:.6f}, M_inf = {cert.M_inf:.4f} beyond R_inf = {cert.R_inf}")

# %%
# Is zero reachable?
# ------------------
m = ModelSpec(h, h, constant_coefficient(1.0), constant_coefficient(1.0), x0=1.0, T=1.0)
rep = feller_diagnostic(m)
for x, v in zip(rep.x, rep.values):
    print(f"x = {x:.0e}   T(0, x) = {v: .3e}")
print("verdict:", rep.verdict)
