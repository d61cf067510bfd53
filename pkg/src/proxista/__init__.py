"""ISTA with weakly convex penalties: thresholds, solvers and property checks."""

from .errors import ConvergenceError, DivergenceError, ShapeError, SpecError, StepTooLargeError
from .linop import (LinearMap, SpectralBounds, adjoint_consistency_check, compose,
                    gram_spectral_bounds, make_block_synthesis, make_convolution, make_dense,
                    make_identity)
from .penalty import (Penalty, eval_penalty, make_firm, make_integer_lattice, make_l1, make_zero,
                      prox_oracle_grid, scale_penalty, separable_lift, subgradient_inequality_check,
                      weak_convexity_certificate)
from .solver import (SmoothTerm, SolveTrace, StepPolicy, StopRule, contraction_rate, cost,
                     fixed_point_residual, ista_step, max_step_fb, max_step_mm, mm_surrogate,
                     quadratic_term, solve_fista, solve_ista, solve_twist, twist_parameters)

__version__ = "0.1.0"
