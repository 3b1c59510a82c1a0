"""Randomly twisted transfer operators on Bergman spaces of a disc.

Simulation of singular-value statistics of weighted composition operators
twisted by random permutation matrices, together with the limit objects
(tracial moments over the free group algebra) that govern them.
"""

__version__ = "0.1.0"

from .domain import Disc, PointOutsideDiscError, basis_eval, bergman_kernel, kernel_diag_bounds
from .system import (
    AffineMap,
    BranchSystem,
    MayerWeight,
    MobiusMap,
    PolynomialWeight,
    ValidationError,
    ValidationReport,
    gauss_branch,
    gauss_system,
    validate_system,
    weight_factor,
)
from .assembly import (
    OverlapMatrix,
    QuadratureRule,
    TruncatedOperator,
    assemble_all,
    assemble_weighted_composition,
    overlap_matrix,
    quadrature_nodes,
    truncation_tail_bound,
)
from .freegroup import (
    RandomHom,
    covariance_V,
    divisor_count,
    evaluate_word,
    fixed_points,
    reduce_word,
    sample_homomorphism,
)
from .twisted import (
    TwistedMatrix,
    build_twisted_matrix,
    counting_function,
    eigenvalues,
    hs_norm_trace_formula,
    restrict_to_VN,
    singular_values,
    trace_power_restricted,
)
from .limit import (
    AlgebraElement,
    algebra_mul,
    arcsine_count,
    arcsine_density,
    arcsine_moment,
    cayley_ball_matrix,
    delta0_distance,
    gram_element,
    tau,
    tau_moment,
    tau_smooth,
)
from .stats import (
    bell,
    estimate_moments,
    limit_moments_L,
    poisson_combo_moment,
    poisson_moment,
    run_monte_carlo,
    stirling,
)
