"""Coverage-guided fuzzing with bandit-scheduled mutation operators.

The package ships four campaign strategies over built-in instrumented
targets: classic deterministic-plus-havoc fuzzing, havoc-only fuzzing with
uniform operator choice, a fixed empirically-trained operator distribution,
and a Thompson-sampling scheduler that re-learns the distribution online
from which operators keep finding new code paths.
"""

from .analysis import StrategyRun, aggregate, relative_coverage, resolve_checkpoints
from .campaign import STRATEGIES, Campaign, CampaignConfig, run_campaign
from .corpus import Corpus, CrashRecord, QueueEntry
from .coverage import MAP_SIZE, CoverageMap, Novelty, TraceRecorder, edge_index, trace_signature
from .executor import (
    ExecutionResult,
    ExecutionStatus,
    Target,
    available_targets,
    execute,
    get_target,
    register_target,
    scrape_dictionary,
)
from .mutation import (
    ALL_OPERATORS,
    Dictionary,
    MutationOperator,
    apply_mutation,
    deterministic_stage,
    mutate_child,
)
from .scheduler import (
    ArmPosterior,
    OperatorDistribution,
    OperatorScheduler,
    active_operators,
    empirical_distribution,
    load_counts,
    load_distribution,
    merge_counts,
    save_counts,
    save_distribution,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_OPERATORS",
    "ArmPosterior",
    "Campaign",
    "CampaignConfig",
    "Corpus",
    "CoverageMap",
    "CrashRecord",
    "Dictionary",
    "ExecutionResult",
    "ExecutionStatus",
    "MAP_SIZE",
    "MutationOperator",
    "Novelty",
    "OperatorDistribution",
    "OperatorScheduler",
    "QueueEntry",
    "STRATEGIES",
    "StrategyRun",
    "Target",
    "TraceRecorder",
    "active_operators",
    "aggregate",
    "apply_mutation",
    "available_targets",
    "deterministic_stage",
    "edge_index",
    "empirical_distribution",
    "execute",
    "get_target",
    "load_counts",
    "load_distribution",
    "merge_counts",
    "mutate_child",
    "register_target",
    "relative_coverage",
    "resolve_checkpoints",
    "run_campaign",
    "save_counts",
    "save_distribution",
    "scrape_dictionary",
    "trace_signature",
]
