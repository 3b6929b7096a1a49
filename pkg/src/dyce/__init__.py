"""Trace-driven configuration search and runtime simulation for dynamically
configurable early-exit models.

Workflow: record (or synthesize) a trace of per-sample exit confidences and
correctness flags, search per-position exit choices and thresholds that
minimize a tunable accuracy/complexity objective, sweep the trade-off weight
to build a frontier of configurations, and replay any of them bit-exactly
through the runtime controller.
"""

from .errors import (
    CandidateOutOfRange,
    DyceError,
    EmptyGrid,
    Infeasible,
    InvalidLambda,
    InvalidShape,
    InvariantViolation,
    MissingFile,
    PositionOutOfRange,
    RoundLimitReached,
    SampleOutOfRange,
    SchemaViolation,
    ShapeMismatch,
)
from .metrics import (
    ExitConfig,
    MetricsReport,
    evaluate,
    exit_partition,
    path_cost_prefix,
)
from .runtime import ConfigStore, SampleOutcome, simulate, switch_config, walk_sample
from .search import (
    FrontierEntry,
    SearchAction,
    SearchSettings,
    iterative_search,
    make_lambda_grid,
    minimize_threshold,
    pareto_filter,
    run_search,
    single_pass_search,
    standalone_exits,
    sweep_lambda,
    uniform_baseline,
    uniform_config,
)
from .trace import (
    CostModel,
    ExitTrace,
    load_trace,
    round_confidence,
    synthesize_trace,
    validate_pair,
    write_trace,
)

__version__ = "0.1.0"

__all__ = [
    "CandidateOutOfRange",
    "ConfigStore",
    "CostModel",
    "DyceError",
    "EmptyGrid",
    "ExitConfig",
    "ExitTrace",
    "FrontierEntry",
    "Infeasible",
    "InvalidLambda",
    "InvalidShape",
    "InvariantViolation",
    "MetricsReport",
    "MissingFile",
    "PositionOutOfRange",
    "RoundLimitReached",
    "SampleOutOfRange",
    "SampleOutcome",
    "SchemaViolation",
    "SearchAction",
    "SearchSettings",
    "ShapeMismatch",
    "evaluate",
    "exit_partition",
    "iterative_search",
    "load_trace",
    "make_lambda_grid",
    "minimize_threshold",
    "pareto_filter",
    "path_cost_prefix",
    "round_confidence",
    "run_search",
    "simulate",
    "single_pass_search",
    "standalone_exits",
    "sweep_lambda",
    "switch_config",
    "synthesize_trace",
    "uniform_baseline",
    "uniform_config",
    "validate_pair",
    "walk_sample",
    "write_trace",
]
