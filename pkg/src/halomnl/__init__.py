"""Choice modeling with pairwise absence (halo) effects.

An MNL-style demand model where each item's log-utility is a baseline
preference plus the accumulated effects of the items missing from the
offer set.  The package covers probability evaluation, schedule
identifiability analysis, closed-form and numerical maximum-likelihood
estimation, seeded demand simulation (including finite segment mixtures),
and model comparison / goodness-of-fit machinery, plus a ``halomnl``
command-line front end.
"""

from .core import (
    AvailabilityMatrix,
    ChoiceDistribution,
    FitResult,
    InvalidDatasetError,
    ParameterMask,
    ParameterSet,
    TransactionDataset,
    ValidationResult,
    Violation,
    validate_dataset,
)
from .estimation import (
    NonFiniteObjectiveError,
    NotC1Error,
    NotC2Error,
    OptimizerConfig,
    ZeroCellCountError,
    fit_closed_form_c1,
    fit_closed_form_c2_triangular,
    fit_mnl,
    fit_numerical,
    supported_mask,
)
from .evaluation import (
    ComparisonReport,
    GofResult,
    NoMatchingPeriodsError,
    RecoveryErrorReport,
    ZeroProbabilityChoiceError,
    aic,
    bic,
    bootstrap_pvalue,
    chi_square_gof,
    compare_models,
    recovery_error,
    reward_index,
    split_periods,
)
from .identifiability import (
    IdentifiabilityReport,
    PeriodPartition,
    classify_schedule,
    identifiable_mask,
    partition_periods,
    satisfies_c1,
    satisfies_c2_triangular,
)
from .probability import (
    GradientVector,
    choice_probabilities,
    effective_utility,
    log_likelihood,
    log_likelihood_gradient,
)
from .simulation import (
    MixtureSpec,
    SimulationPlan,
    appendix_fixture,
    c1_schedule_with_periods,
    make_c1_schedule,
    make_c2_schedule,
    simulate_halo,
    simulate_mmnl,
)

__version__ = "0.1.0"

__all__ = [
    "AvailabilityMatrix",
    "ChoiceDistribution",
    "ComparisonReport",
    "FitResult",
    "GofResult",
    "GradientVector",
    "IdentifiabilityReport",
    "InvalidDatasetError",
    "MixtureSpec",
    "NoMatchingPeriodsError",
    "NonFiniteObjectiveError",
    "NotC1Error",
    "NotC2Error",
    "OptimizerConfig",
    "ParameterMask",
    "ParameterSet",
    "PeriodPartition",
    "RecoveryErrorReport",
    "SimulationPlan",
    "TransactionDataset",
    "ValidationResult",
    "Violation",
    "ZeroCellCountError",
    "ZeroProbabilityChoiceError",
    "aic",
    "appendix_fixture",
    "bic",
    "bootstrap_pvalue",
    "c1_schedule_with_periods",
    "chi_square_gof",
    "choice_probabilities",
    "classify_schedule",
    "compare_models",
    "effective_utility",
    "fit_closed_form_c1",
    "fit_closed_form_c2_triangular",
    "fit_mnl",
    "fit_numerical",
    "identifiable_mask",
    "log_likelihood",
    "log_likelihood_gradient",
    "make_c1_schedule",
    "make_c2_schedule",
    "partition_periods",
    "recovery_error",
    "reward_index",
    "satisfies_c1",
    "satisfies_c2_triangular",
    "simulate_halo",
    "simulate_mmnl",
    "split_periods",
    "supported_mask",
    "validate_dataset",
    "__version__",
]
