"""Heat kernels of weighted dbar Laplacians for polynomial weights.

For a subharmonic, nonharmonic real polynomial p on C and tau > 0, the
weighted operator

    box_{tau p} = -Zbar Z,    Zbar = d/dzbar + tau p_zbar,
                              Z    = d/dz    - tau p_z,

is a nonnegative magnetic Schrodinger operator.  This package computes
its heat kernel H(s, z, w) two independent ways -- a Crank-Nicolson grid
solver and a Feynman-Kac-Ito Monte Carlo over Brownian bridges -- builds
the fundamental solution G = integral of H, evaluates the associated
size functions and control metric, and verifies the analytic estimates
(Gaussian domination, long-time mu-decay, derivative exponents, scaling
covariance, Green-function regimes) quantitatively.
"""

from .box_operator import (ComplexField, DiscreteBox, FIELD_KINDS, Grid2D,
                           apply_field, assemble_box, smallest_eigenvalues)
from .errors import (AllMixedTermsVanishError, ConfigParseError,
                     ConfigValidationError, CylinderOutOfRangeError,
                     DegreeTooLowError, GridTooCoarseError, HarmonicError,
                     NotHermitianError, NotPSDError, NotRealError,
                     OrderTooHighError, PolyheatError, PositiveRealPartError,
                     ScheduleTooShortError, ScheduleUnreachableError,
                     SolverDivergedError, TailNotNegligibleError)
from .feynman_kac import BridgePath, MCKernelResult, mc_kernel, phase, sample_bridge
from .geometry import (MetricGrid, RhoResult, approx_inverse_check,
                       build_metric_grid, lambda_fn, mu_fn, mu_on_points,
                       rho_closed_form, rho_metric, sobolev_radius, twist)
from .heat_solver import (FundamentalSolutionField, KernelColumn, evolve,
                          free_heat_kernel, fundamental_solution,
                          kernel_column, ring_mean)
from .polynomial import (PolynomialSpec, RecenteredTaylor, eval_p, gradient,
                         laplacian, make_polynomial, model_p1, model_p2,
                         poly_id, recenter, subharmonicity_check,
                         taylor_coefficient_grid)
from .report import BoundReport
from .verifier import (DecayTerm, SUITE_NAMES, check_appendix_equivalence,
                       check_derivatives, check_energy, check_G_bounds,
                       check_gaussian, check_longtime, check_scaling,
                       check_subsolution, lattice_mask_radius, run_suite)

__version__ = "0.1.0"
