"""Weighted pseudo almost periodic functions and mild solutions of nonautonomous evolution equations."""

__version__ = "0.1.0"

from .errors import ConfigError, ConvergenceError, PreconditionError, WpapError
from .weights import Weight, classify_weight, ergodic_mass, weights_equivalent
from .ap import APSignal, bohr_coefficient, find_window_length, translation_certificate
from .pap import (Forcing, SampledPath, WpapDecomposition, compose_and_test,
                  convolve_and_test, equivalence_transfers_pap0, is_pap0,
                  weighted_ergodic_norm)
from .evolution import (EvolutionFamily, LinearFamily, alpha_norm, check_AT, check_H4,
                        dichotomy, fit_estimate, green_kernel)
from .mild import (MildProblem, contraction_constant, gamma1, gamma2, gamma3, gamma4,
                   map_M, mild_identity_residual, solve, verify_wpap)
from .heat import Domain1D, HeatDemoConfig, a_gamma, build_heat_problem, run_demo
