"""Learning discrete Bayesian networks from data.

Exact inference, conjugate Dirichlet parameter learning, BD/BDe/BIC
scoring, score-based structure search with equivalence-class utilities,
and EM / Gibbs estimation for incomplete data.
"""

__version__ = "0.1.0"

from .core import (
    MISSING,
    DataSet,
    DirichletSpec,
    FamilyCounts,
    NetworkStructure,
    ParameterSet,
    VariableSpec,
    config_states,
    count_sufficient_stats,
    joint_probability,
    parent_config_index,
    validate_dag,
)
from .errors import (
    BayesNetError,
    ConstraintViolation,
    CycleDetected,
    DuplicateVariable,
    EmptyDataset,
    EmptyModelSet,
    IncompleteData,
    InvalidIndex,
    InvariantViolation,
    LengthMismatch,
    MissingParentValue,
    MissingValue,
    NegativeCount,
    NonPositiveAlpha,
    OverlapTargetEvidence,
    ParseError,
    SchemaMismatch,
    ShapeMismatch,
    TooLarge,
    UnknownParent,
    UnknownState,
    VariableSetMismatch,
    ZeroCompletionProbability,
    ZeroEvidenceProbability,
    ZeroFamilyMass,
    ZeroPriorProbability,
)
from .estimators import DiscreteBayesNet, StructureLearner, check_dataset
from .incomplete import (
    DirichletMixture,
    EmResult,
    GibbsSummary,
    em_fit,
    em_restarts,
    expected_counts,
    gibbs_posterior,
    single_case_posterior,
)
from .inference import QueryResult, enumerate_query, family_posteriors, query
from .io import (
    CountsTableSpec,
    NetworkDocument,
    load_counts_table,
    load_csv,
    load_network,
    read_counts_file,
    save_csv,
    save_network,
    to_dot,
)
from .params import (
    BDePrior,
    BdePriorInputs,
    bde_priors,
    dirichlet_predictive,
    dirichlet_update,
    network_predictive,
)
from .scoring import (
    Constraints,
    ScoreReport,
    StructurePrior,
    bd_log_marginal,
    bic_score,
    local_criterion,
    log_posterior_score,
    sequential_predictive_log,
)
from .search import (
    AnnealingSchedule,
    ChangeOp,
    ScoreCache,
    SearchOutcome,
    compelled_edges,
    eligible_changes,
    enumerate_dags,
    enumerate_equivalence_class,
    exhaustive_search,
    greedy_search,
    independence_equivalent,
    model_average_predict,
    simulated_annealing,
    structure_weights,
)

__all__ = [
    "__version__",
    "AnnealingSchedule",
    "BDePrior",
    "BayesNetError",
    "BdePriorInputs",
    "ChangeOp",
    "ConstraintViolation",
    "Constraints",
    "CountsTableSpec",
    "CycleDetected",
    "DataSet",
    "DirichletMixture",
    "DirichletSpec",
    "DiscreteBayesNet",
    "DuplicateVariable",
    "EmResult",
    "EmptyDataset",
    "EmptyModelSet",
    "FamilyCounts",
    "GibbsSummary",
    "IncompleteData",
    "InvalidIndex",
    "InvariantViolation",
    "LengthMismatch",
    "MISSING",
    "MissingParentValue",
    "MissingValue",
    "NegativeCount",
    "NetworkDocument",
    "NetworkStructure",
    "NonPositiveAlpha",
    "OverlapTargetEvidence",
    "ParameterSet",
    "ParseError",
    "QueryResult",
    "SchemaMismatch",
    "ScoreCache",
    "ScoreReport",
    "SearchOutcome",
    "ShapeMismatch",
    "StructureLearner",
    "StructurePrior",
    "TooLarge",
    "UnknownParent",
    "UnknownState",
    "VariableSetMismatch",
    "VariableSpec",
    "ZeroCompletionProbability",
    "ZeroEvidenceProbability",
    "ZeroFamilyMass",
    "ZeroPriorProbability",
    "bd_log_marginal",
    "bde_priors",
    "bic_score",
    "check_dataset",
    "compelled_edges",
    "config_states",
    "count_sufficient_stats",
    "dirichlet_predictive",
    "dirichlet_update",
    "eligible_changes",
    "em_fit",
    "em_restarts",
    "enumerate_dags",
    "enumerate_equivalence_class",
    "enumerate_query",
    "exhaustive_search",
    "expected_counts",
    "family_posteriors",
    "gibbs_posterior",
    "greedy_search",
    "independence_equivalent",
    "joint_probability",
    "load_counts_table",
    "load_csv",
    "load_network",
    "local_criterion",
    "log_posterior_score",
    "model_average_predict",
    "network_predictive",
    "parent_config_index",
    "query",
    "read_counts_file",
    "save_csv",
    "save_network",
    "sequential_predictive_log",
    "simulated_annealing",
    "single_case_posterior",
    "structure_weights",
    "to_dot",
    "validate_dag",
]
