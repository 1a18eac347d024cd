"""Simulation and verification toolkit for SDEs with state-dependent variable exponents.

The model is ``dX = mu(t) X**p(X) dt + sigma(t) X**q(X) dW`` on ``(0, inf)``.
"""
__version__ = "0.1.0"

from .exponents import (ExponentFunction, GridSpec, GrowthCertificate, constant_exponent,
                        growth_certificate, lipschitz_constant, parse_exponent,
                        rational_exponent, remark1_exponent, validate_class_s)
from .model import (CoefficientFunction, ModelSpec, constant_coefficient, diffusion,
                    diffusion_dx, drift, feller_diagnostic, parse_coefficient)
from .simulate import McEstimate, Path, PathGrid, simulate_batch, simulate_path
from .picard import contraction_plan, phi_apply, solve_fixed_point, solve_global
from .analysis import verify_asymptotic, verify_moment_bound, verify_stability
from .fk_poisson import PoissonProblem, cross_validate, fd_solve, fk_solve

__all__ = [
    "ExponentFunction", "GridSpec", "GrowthCertificate", "constant_exponent",
    "growth_certificate", "lipschitz_constant", "parse_exponent", "rational_exponent",
    "remark1_exponent", "validate_class_s", "CoefficientFunction", "ModelSpec",
    "constant_coefficient", "diffusion", "diffusion_dx", "drift", "feller_diagnostic",
    "parse_coefficient", "McEstimate", "Path", "PathGrid", "simulate_batch", "simulate_path",
    "contraction_plan", "phi_apply", "solve_fixed_point", "solve_global",
    "verify_asymptotic", "verify_moment_bound", "verify_stability", "PoissonProblem",
    "cross_validate", "fd_solve", "fk_solve",
]
