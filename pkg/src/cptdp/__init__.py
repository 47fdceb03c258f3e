"""Risk-sensitive dynamic programming under cumulative prospect theory."""

__version__ = "0.1.0"

from cptdp.cpt import (
    CptSpec,
    DiscreteDistribution,
    IdentityUtility,
    IdentityWeighting,
    PowerUtility,
    QuadratureError,
    ScaledUtility,
    TabulatedWeighting,
    TverskyKahnemanWeighting,
    UtilityFunction,
    WeightingFunction,
    cpt_decomposition,
    cpt_value_exact,
    cpt_value_quadrature,
    cpt_value_subnormalized,
    utility_derivative,
    utility_inverse,
    weight_eval,
)
from cptdp.estimator import (
    DiscreteSampler,
    EstimatorResult,
    SampleBatch,
    convergence_study,
    estimate_cpt,
)
from cptdp.mdp import (
    Discounted,
    MarkovModel,
    Outcome,
    RandomizedPolicy,
    Transient,
    ValueFunction,
    pliska_check,
    return_distribution,
    uniform_transience_certificate,
    validate_model,
)
from cptdp.bellman import (
    ContractionCheck,
    SolveConfig,
    SolveResult,
    StructuralConditionError,
    apply_H,
    bellman_min,
    contraction_condition_check,
    empirical_contraction_modulus,
    k_step_contraction_probe,
    monotonicity_probe,
    value_iteration,
)

__all__ = [name for name in dir() if not name.startswith("_")]
