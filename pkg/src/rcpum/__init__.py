"""Numerical identification toolkit for random-coefficient perturbed
utility models: exact mean-demand oracles, finite-difference derivative
tables at a centering point, constructive recovery of coefficient moments
and value-function derivatives, welfare and counterfactual objects, and
consistency diagnostics.
"""

from .asf import AsfEvaluator, asf, ybar_given_beta
from .diagnostics import (
    DiagnosticsReport,
    build_report,
    cauchy_schwarz_check,
    complementarity_signs,
    sign_first_moment,
    symmetry_check,
)
from .distributions import (
    DiscreteBeta,
    MomentIndex,
    ProductBeta,
    UnivariateAtoms,
    all_moment_indices,
    true_moment,
)
from .exceptions import (
    AnchorError,
    ConfigurationError,
    EvaluationError,
    ExtrapolationWarning,
    InfeasibleScenarioError,
    PermutationConditionError,
    PreconditionError,
    RcpumError,
    RelevanceError,
    WeightingError,
)
from .models import (
    EXCLUDED,
    BundleModel,
    BundleScenario,
    LogitModel,
    TabulatedModel,
    latent_utility,
    solve_choice,
)
from .numdiff import DerivativeTable, FdScheme, derivative_table, mixed_partial
from .recovery import (
    ChainResult,
    MomentTable,
    RecoveryConfig,
    VDerivTable,
    chain_ratios,
    exponent_moment_ratio,
    plugin_estimate,
    ratio_of_moments,
    recover_moments_independence,
    recover_moments_scale,
    recover_moments_vknown,
    recover_v_derivatives,
    same_good_ratios,
)
from .welfare import (
    TaylorVModel,
    average_indirect_utility,
    counterfactual_demand,
    default_trust_radius,
    path_integral_v,
    quantile_match_vprime,
    taylor_v,
)

__version__ = "0.1.0"
