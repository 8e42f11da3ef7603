"""Disparity measurement through emulated observational target trials.

The package ingests long-format person-time data, evaluates eligibility,
pools one randomly selected trial per person per time unit, and estimates
standardized disparity (difference in standardized mean outcomes between a
marginalized and a privileged group) under four propositions: a purely
descriptive contrast among the observed eligible population, and three
counterfactual contrasts that remove collider-selection contributions by a
stochastic intervention on the eligibility variables.  Each proposition has
an inverse-probability-weighting and a g-computation route, a matching
two-phase sampling design, and a brute-force identification oracle backed
by a structural-equation simulator.  Confidence intervals come from a
cluster bootstrap.
"""

__version__ = "0.1.0"

from .data_model import (
    Criterion,
    EligibilityPartition,
    ObservationTable,
    StandardPopulation,
    TableSchema,
    TrialSpec,
    ValidationReport,
    load_observations,
    save_observations,
    validate_table,
)
from .emulation import (
    annotate,
    assign_standard_membership,
    evaluate_eligibility,
    select_trials,
)
from .estimators import (
    DisparityEstimate,
    ModelConfig,
    TauEstimate,
    WeightVector,
    compute_weights,
    estimate_disparity,
    estimate_tau_ice,
    estimate_tau_weighting,
)
from .inference import InferenceConfig, cluster_bootstrap
from .numerics import GlmFit, fit_logistic, predict_prob, spline_basis
from .oracle_sim import (
    ClusterSpec,
    DagConfig,
    NodeSpec,
    SyntheticPopulation,
    apply_stochastic_intervention,
    brute_force_identify,
    simulate_population,
    true_tau,
)
from .sampling_design import (
    SamplingFractions,
    SamplingSizes,
    compute_sampling_fractions,
    normalize_fractions,
    two_phase_sample,
)

__all__ = [
    "__version__",
    "Criterion",
    "EligibilityPartition",
    "ObservationTable",
    "StandardPopulation",
    "TableSchema",
    "TrialSpec",
    "ValidationReport",
    "load_observations",
    "save_observations",
    "validate_table",
    "annotate",
    "assign_standard_membership",
    "evaluate_eligibility",
    "select_trials",
    "DisparityEstimate",
    "ModelConfig",
    "TauEstimate",
    "WeightVector",
    "compute_weights",
    "estimate_disparity",
    "estimate_tau_ice",
    "estimate_tau_weighting",
    "InferenceConfig",
    "cluster_bootstrap",
    "GlmFit",
    "fit_logistic",
    "predict_prob",
    "spline_basis",
    "ClusterSpec",
    "DagConfig",
    "NodeSpec",
    "SyntheticPopulation",
    "apply_stochastic_intervention",
    "brute_force_identify",
    "simulate_population",
    "true_tau",
    "SamplingFractions",
    "SamplingSizes",
    "compute_sampling_fractions",
    "normalize_fractions",
    "two_phase_sample",
]
