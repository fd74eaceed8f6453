"""Exact and asymptotic statistics of a tracer in the symmetric exclusion process.

Submodules
----------
contour      trapezoidal quadrature on circles
kernel       Fredholm determinant of the height generating function
series       truncated power series, moments and cumulants
asymptotics  large-time cumulant generating function and rate functions
simulation   exact continuous-time Monte Carlo
asep         tau-moments of the asymmetric process
validate     acceptance suite
"""
from .errors import (ConsistencyError, DomainError, EvaluationError, InvalidArgument,
                     PoleProximityError, SepTracerError, UnsupportedDimension)
from .kernel import (DensityPair, fredholm_det, gf_height, height_pmf, kernel_spec,
                     multi_integral_Jn, tagged_cdf, trace_power_In)
from .series import cumulant_N_finite, moment_N
from .asymptotics import C_of_s, Phi, mu, phi_rate, tracer_cumulant, xi0_solve

__version__ = "0.1.0"

__all__ = [
    "ConsistencyError", "DomainError", "EvaluationError", "InvalidArgument",
    "PoleProximityError", "SepTracerError", "UnsupportedDimension", "DensityPair",
    "fredholm_det", "gf_height", "height_pmf", "kernel_spec", "multi_integral_Jn",
    "tagged_cdf", "trace_power_In", "cumulant_N_finite", "moment_N", "C_of_s", "Phi",
    "mu", "phi_rate", "tracer_cumulant", "xi0_solve", "__version__",
]
