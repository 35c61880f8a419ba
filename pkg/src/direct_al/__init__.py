"""Active learning for class-imbalanced pools.

The selection strategy searches, per class, for the threshold position in
a confidence-sorted ordering that best separates the class from the rest,
then spends the labeling budget around that boundary.  Everything here is
deterministic given a master seed and the label history.
"""

from .direct import (
    STRATEGIES,
    LabelRequest,
    RoundConfig,
    RoundEnd,
    SelectionEngine,
    annotate_near_threshold,
    direct_round,
)
from .errors import ConfigError, ContractViolation, PoolParseError
from .harness import (
    ExperimentLog,
    ExperimentSpec,
    build_pool,
    holdout_split,
    parse_spec,
    run_experiment,
)
from .pool import (
    LabelStore,
    Pool,
    apply_noise,
    generate_synthetic,
    load_pool,
    query_oracle,
    save_pool,
)
from .reduction import (
    brute_force_optimal_threshold,
    empirical_loss_table,
    estimate_threshold,
    lemma_equivalence_check,
)
from .scorer import LinearScorer, ScorerConfig, balanced_accuracy, sorted_class_view, train_scorer
from .vreduce import VersionSpace, init_version_space, vreduce_run

__version__ = "0.1.0"

__all__ = [
    "STRATEGIES",
    "ConfigError",
    "ContractViolation",
    "ExperimentLog",
    "ExperimentSpec",
    "LabelRequest",
    "LabelStore",
    "LinearScorer",
    "Pool",
    "PoolParseError",
    "RoundConfig",
    "RoundEnd",
    "ScorerConfig",
    "SelectionEngine",
    "VersionSpace",
    "annotate_near_threshold",
    "apply_noise",
    "balanced_accuracy",
    "brute_force_optimal_threshold",
    "build_pool",
    "direct_round",
    "empirical_loss_table",
    "estimate_threshold",
    "generate_synthetic",
    "holdout_split",
    "init_version_space",
    "lemma_equivalence_check",
    "load_pool",
    "parse_spec",
    "query_oracle",
    "run_experiment",
    "save_pool",
    "sorted_class_view",
    "train_scorer",
    "vreduce_run",
]
