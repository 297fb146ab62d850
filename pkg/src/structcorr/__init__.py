"""Bayesian inference for multivariate normal models with a structured
(exchangeable-time, multi-outcome) correlation matrix under missing data,
positive-definite proposal intervals from largest-submatrix enumeration,
and SRM-optimal convex combinations of outcomes."""

__version__ = "0.1.0"

from .data import Dataset, Subject, parse_dataset, write_dataset
from .errors import (
    DataValidationError,
    NotPositiveDefiniteError,
    NumericalError,
    StructcorrError,
)
from .pdbounds import (
    PdInterval,
    SubmatrixPlan,
    barnard_interval,
    enumerate_eta_plans,
    enumerate_gamma_plans,
    enumerate_rho_plan,
    greedy_submatrix,
    pd_support,
    plans_for_param,
)
from .sampler import (
    ChainOutput,
    RBetaShape,
    SamplerConfig,
    gibbs_means,
    init_state,
    pooled_draws,
    propose_correlation,
    propose_variance,
    rbeta_shape,
    run_chain,
    run_chains,
    tune_kappa,
)
from .simulate import (
    MissingnessSpec,
    OpCharReport,
    TruthSpec,
    apply_missingness,
    generate_dataset,
    run_study,
)
from .structure import (
    UNIT,
    CorrelationParams,
    ModelState,
    MomentParams,
    StructureSpec,
    assemble_correlation,
    assemble_covariance,
    index_param,
    is_positive_definite,
    observed_projection,
)
from .weights import (
    CrossSectionMoments,
    WeightSummary,
    barycentric_coordinates,
    optimal_weights,
    posterior_weights,
    srm,
)
