"""Configuration search: per-position threshold minimization, greedy search
algorithms, the uniform-threshold baseline, standalone-exit analysis and the
lambda sweep that produces the runtime-selectable frontier.

The objective ``f = lam * (1 - A) + (1 - lam) * C`` is piecewise constant in
any single threshold, with breakpoints only at the confidences of samples
that reach the position.  Scanning those values is therefore an exact
minimizer; golden-section search over (0, 1) is available as a cheaper
approximation for very large traces.

Tie-break rule everywhere in the search: lowest position, then lowest
candidate index, then lowest threshold.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (
    CandidateOutOfRange,
    EmptyGrid,
    InvalidLambda,
    PositionOutOfRange,
    RoundLimitReached,
)
from .metrics import (
    ExitConfig,
    MetricsReport,
    check_lambda,
    check_shapes,
    evaluate,
    path_cost_prefix,
)
from .trace import CostModel, ExitTrace

ALGORITHMS = ("single_pass", "iterative")
THRESHOLD_METHODS = ("exact_scan", "golden_section")


@dataclass(frozen=True)
class SearchSettings:
    """Knobs shared by the search entry points."""

    algorithm: str = "single_pass"
    threshold_method: str = "exact_scan"
    golden_tolerance: float = 1e-4
    max_rounds: int = 1000

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.threshold_method not in THRESHOLD_METHODS:
            raise ValueError(f"threshold_method must be one of {THRESHOLD_METHODS}")
        if not self.golden_tolerance > 0:
            raise ValueError("golden_tolerance must be positive")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be at least 1")


@dataclass(frozen=True)
class SearchAction:
    """One committed modification: candidate ``candidate`` at 1-based
    ``position`` with ``threshold``, achieving objective ``objective``."""

    position: int
    candidate: int
    threshold: float
    objective: float


@dataclass(frozen=True)
class FrontierEntry:
    """One sweep output point: the lambda, the config it produced and its metrics."""

    lam: float
    config: ExitConfig
    metrics: MetricsReport

    def to_json_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "k": list(self.config.k),
            "t": list(self.config.t),
            "metrics": self.metrics.to_json_dict(),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "FrontierEntry":
        return cls(
            lam=float(data["lambda"]),
            config=ExitConfig(k=tuple(data["k"]), t=tuple(data["t"])),
            metrics=MetricsReport.from_json_dict(data["metrics"]),
        )


def _upstream_state(trace: ExitTrace, config: ExitConfig, pos0: int):
    """Exit counts before ``pos0`` and the mask of samples reaching it."""
    remaining = np.ones(trace.sample_count, dtype=bool)
    e_up = np.zeros(pos0, dtype=np.int64)
    ec_up = np.zeros(pos0, dtype=np.int64)
    for j in range(pos0):
        k = config.k[j]
        if k == 0:
            continue
        fired = remaining & (trace.confidence[j][:, k - 1] >= config.t[j])
        e_up[j] = int(fired.sum())
        if e_up[j]:
            ec_up[j] = int(trace.correct[j][fired, k - 1].sum())
        remaining &= ~fired
    return e_up, ec_up, remaining


def _downstream_fate(trace: ExitTrace, config: ExitConfig, pos0: int, reach_idx: np.ndarray):
    """First exit after ``pos0`` (0-based position and correctness) for each
    reaching sample, assuming it does not exit at ``pos0``."""
    n_reach = reach_idx.size
    down_pos = np.full(n_reach, -1, dtype=np.int64)
    down_corr = np.zeros(n_reach, dtype=np.int64)
    unresolved = np.ones(n_reach, dtype=bool)
    for j in range(pos0 + 1, trace.position_count):
        k = config.k[j]
        if k == 0:
            continue
        fired = unresolved & (trace.confidence[j][reach_idx, k - 1] >= config.t[j])
        if fired.any():
            down_pos[fired] = j
            down_corr[fired] = trace.correct[j][reach_idx[fired], k - 1]
            unresolved &= ~fired
    assert not unresolved.any(), "final exit must resolve every sample"
    return down_pos, down_corr


def _exact_scan(trace, costs, config, position, k_c, lam):
    """Scan every distinct threshold at (position, k_c); exact minimizer.

    Candidate thresholds are the unique confidences of samples reaching the
    position under the rest of the config, plus 1.0 as the fires-for-nothing
    sentinel.  The winner is re-evaluated through ``evaluate`` so the returned
    objective is exactly the one a full evaluation reports.
    """
    pos0 = position - 1
    m = trace.sample_count
    e_up, ec_up, reach = _upstream_state(trace, config, pos0)
    reach_idx = np.flatnonzero(reach)
    if reach_idx.size == 0:
        probe = config.substituted(position, k_c, 1.0)
        return 1.0, evaluate(trace, costs, probe, lam).objective

    k_sub = config.k[:pos0] + (k_c,) + config.k[pos0 + 1:]
    prefix = path_cost_prefix(costs, k_sub)
    down_pos, down_corr = _downstream_fate(trace, config, pos0, reach_idx)
    down_cost = prefix[down_pos]

    conf = trace.confidence[pos0][reach_idx, k_c - 1]
    corr = trace.correct[pos0][reach_idx, k_c - 1].astype(np.int64)
    order = np.argsort(-conf, kind="stable")
    cum_corr = np.cumsum(corr[order])
    cum_down_corr = np.cumsum(down_corr[order])
    cum_down_cost = np.cumsum(down_cost[order])

    uniq_asc, counts_asc = np.unique(conf, return_counts=True)
    thresholds = uniq_asc[::-1]
    included = np.cumsum(counts_asc[::-1])
    if thresholds[0] < 1.0:
        thresholds = np.concatenate(([1.0], thresholds))
        included = np.concatenate(([0], included))

    idx = included - 1
    ec_at = np.where(included > 0, cum_corr[idx], 0)
    removed_corr = np.where(included > 0, cum_down_corr[idx], 0)
    removed_cost = np.where(included > 0, cum_down_cost[idx], 0.0)

    ec_up_total = int(ec_up.sum())
    up_cost = float(e_up @ prefix[:pos0]) if pos0 else 0.0
    down_corr_total = int(down_corr.sum())
    down_cost_total = float(cum_down_cost[-1])

    ec_total = ec_up_total + ec_at + (down_corr_total - removed_corr)
    cost_total = up_cost + included * prefix[pos0] + (down_cost_total - removed_cost)
    a = ec_total / (m * costs.base_accuracy)
    c = cost_total / m
    f_scan = lam * (1.0 - a) + (1.0 - lam) * c

    # thresholds run high to low, so the last minimum is the lowest threshold
    best = int(np.flatnonzero(f_scan == f_scan.min())[-1])
    t_best = float(thresholds[best])
    f_best = evaluate(trace, costs, config.substituted(position, k_c, t_best), lam).objective
    return t_best, f_best


def _golden_section(goal, tolerance):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = 0.0, 1.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = goal(c), goal(d)
    while (b - a) > tolerance:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = goal(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = goal(d)
    t = 0.5 * (a + b)
    return t, goal(t)


def minimize_threshold(
    trace: ExitTrace,
    costs: CostModel,
    config: ExitConfig,
    position: int,
    k_c: int,
    lam: float,
    settings: SearchSettings = SearchSettings(),
) -> tuple[float, float]:
    """Best threshold for candidate ``k_c`` at 1-based ``position``.

    Returns ``(threshold, objective)`` for the config with that single
    position substituted, everything else unchanged.  ``k_c == 0`` means
    disabling the position and returns threshold 1.0.
    """
    lam = check_lambda(lam)
    check_shapes(trace, config)
    if not 1 <= position <= trace.position_count - 1:
        raise PositionOutOfRange(
            f"position {position} outside searchable range 1..{trace.position_count - 1}"
        )
    if not 0 <= k_c <= trace.candidates[position - 1]:
        raise CandidateOutOfRange(
            f"candidate {k_c} outside 0..{trace.candidates[position - 1]} "
            f"at position {position}"
        )
    if k_c == 0:
        probe = config.substituted(position, 0, 1.0)
        return 1.0, evaluate(trace, costs, probe, lam).objective
    if settings.threshold_method == "golden_section":
        def goal(t):
            return evaluate(trace, costs, config.substituted(position, k_c, t), lam).objective

        return _golden_section(goal, settings.golden_tolerance)
    return _exact_scan(trace, costs, config, position, k_c, lam)


def _best_action_at(trace, costs, config, position, lam, settings, f_bar):
    """Best improving action at one position, or None.  Probes candidates in
    ascending order and keeps strict improvements, which implements the
    lowest-candidate tie-break."""
    best = None
    bound = f_bar
    for k_c in range(trace.candidates[position - 1] + 1):
        t_c, f_c = minimize_threshold(trace, costs, config, position, k_c, lam, settings)
        if f_c < bound:
            best = SearchAction(position=position, candidate=k_c, threshold=t_c, objective=f_c)
            bound = f_c
    return best


def single_pass_search(
    trace: ExitTrace,
    costs: CostModel,
    lam: float,
    settings: SearchSettings = SearchSettings(),
    history: list[SearchAction] | None = None,
) -> tuple[ExitConfig, MetricsReport]:
    """One ordered pass over positions, committing the best improving action
    at each position before moving to the next."""
    lam = check_lambda(lam)
    config = ExitConfig.empty(trace.position_count)
    check_shapes(trace, config)
    f_min = evaluate(trace, costs, config, lam).objective
    for position in range(1, trace.position_count):
        action = _best_action_at(trace, costs, config, position, lam, settings, f_min)
        if action is not None:
            config = config.substituted(action.position, action.candidate, action.threshold)
            f_min = action.objective
            if history is not None:
                history.append(action)
    return config, evaluate(trace, costs, config, lam)


def iterative_search(
    trace: ExitTrace,
    costs: CostModel,
    lam: float,
    settings: SearchSettings = SearchSettings(),
    history: list[SearchAction] | None = None,
) -> tuple[ExitConfig, MetricsReport]:
    """Repeated full sweeps, each committing the single best improving action,
    until a sweep finds none (the result is then 1-action locally optimal) or
    ``settings.max_rounds`` actions were committed."""
    lam = check_lambda(lam)
    config = ExitConfig.empty(trace.position_count)
    check_shapes(trace, config)
    f_min = evaluate(trace, costs, config, lam).objective
    rounds = 0
    while True:
        candidate: SearchAction | None = None
        for position in range(1, trace.position_count):
            action = _best_action_at(trace, costs, config, position, lam, settings, f_min)
            if action is not None:
                candidate = action
                f_min = action.objective
        if candidate is None:
            break
        config = config.substituted(candidate.position, candidate.candidate, candidate.threshold)
        if history is not None:
            history.append(candidate)
        rounds += 1
        if rounds >= settings.max_rounds:
            warnings.warn(
                f"round limit reached after {rounds} committed actions; "
                f"local optimality not verified",
                RoundLimitReached,
            )
            break
    return config, evaluate(trace, costs, config, lam)


def run_search(
    trace: ExitTrace,
    costs: CostModel,
    lam: float,
    settings: SearchSettings = SearchSettings(),
    history: list[SearchAction] | None = None,
) -> tuple[ExitConfig, MetricsReport]:
    """Dispatch on ``settings.algorithm``."""
    if settings.algorithm == "iterative":
        return iterative_search(trace, costs, lam, settings, history)
    return single_pass_search(trace, costs, lam, settings, history)


def pareto_filter(entries: list[FrontierEntry]) -> list[FrontierEntry]:
    """Entries not dominated in (lower C, higher A), deduplicated, sorted by C.

    The result is strictly increasing in both C and A.
    """
    ranked = sorted(
        entries,
        key=lambda e: (
            e.metrics.relative_complexity,
            -e.metrics.relative_accuracy,
            e.lam,
        ),
    )
    kept: list[FrontierEntry] = []
    best_a = -math.inf
    for entry in ranked:
        if entry.metrics.relative_accuracy > best_a:
            kept.append(entry)
            best_a = entry.metrics.relative_accuracy
    return kept


def sweep_lambda(
    trace: ExitTrace,
    costs: CostModel,
    lambda_grid: list[float],
    settings: SearchSettings = SearchSettings(),
    threads: int = 1,
) -> tuple[list[FrontierEntry], list[FrontierEntry]]:
    """Run the selected search once per lambda (independent runs).

    Returns ``(entries, pareto)`` where ``pareto`` is the non-dominated
    subset of ``entries``.
    """
    if not lambda_grid:
        raise EmptyGrid("lambda grid is empty")
    grid = [check_lambda(v) for v in lambda_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise InvalidLambda("lambda grid must be sorted ascending")

    def one(lam: float) -> FrontierEntry:
        config, report = run_search(trace, costs, lam, settings)
        return FrontierEntry(lam=lam, config=config, metrics=report)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            entries = list(pool.map(one, grid))
    else:
        entries = [one(lam) for lam in grid]
    return entries, pareto_filter(entries)


def make_lambda_grid(start: float, end: float, step: float) -> list[float]:
    """Inclusive ascending grid rounded to 12 decimals to keep values clean."""
    if step <= 0:
        raise EmptyGrid(f"step must be positive, got {step!r}")
    if not (0.0 <= start <= end <= 1.0):
        raise InvalidLambda(f"grid bounds must satisfy 0 <= start <= end <= 1")
    grid = []
    i = 0
    while True:
        value = round(start + i * step, 12)
        if value > end + 1e-12:
            break
        grid.append(min(value, end))
        i += 1
    if not grid:
        raise EmptyGrid("lambda grid is empty")
    return grid


def uniform_config(trace: ExitTrace, k_fixed: int, t: float) -> ExitConfig:
    """Candidate ``k_fixed`` with threshold ``t`` at every position that has
    it; positions lacking it are disabled, the final head stays fixed."""
    if k_fixed < 1:
        raise CandidateOutOfRange(f"k_fixed must be at least 1, got {k_fixed}")
    hosts = [
        pos0 for pos0 in range(trace.position_count - 1)
        if trace.candidates[pos0] >= k_fixed
    ]
    if not hosts and trace.position_count > 1:
        raise CandidateOutOfRange(f"candidate {k_fixed} out of range at every position")
    k = tuple(
        (k_fixed if pos0 in hosts else 0) for pos0 in range(trace.position_count - 1)
    ) + (1,)
    thresholds = tuple(
        (float(t) if pos0 in hosts else 1.0) for pos0 in range(trace.position_count - 1)
    ) + (0.0,)
    return ExitConfig(k=k, t=thresholds)


def uniform_baseline(
    trace: ExitTrace,
    costs: CostModel,
    lam: float,
    k_fixed: int,
    threshold_grid: list[float],
) -> tuple[ExitConfig, MetricsReport]:
    """One exit type with one shared threshold at every position that has it.

    Evaluates every grid threshold and returns the minimizer of the objective;
    ties go to the highest threshold (the most conservative uniform setting).
    """
    lam = check_lambda(lam)
    if not threshold_grid:
        raise EmptyGrid("threshold grid is empty")
    best: tuple[ExitConfig, MetricsReport] | None = None
    for t in sorted(float(v) for v in threshold_grid):
        config = uniform_config(trace, k_fixed, t)
        report = evaluate(trace, costs, config, lam)
        if best is None or report.objective <= best[1].objective:
            best = (config, report)
    return best


def standalone_exits(trace: ExitTrace, costs: CostModel) -> list[tuple[int, int, float, float]]:
    """Accuracy and path cost of each exit evaluated alone with threshold 0.

    Returns rows ``(position, exit_index, accuracy, complexity)`` where
    complexity is the cost of running every segment up to the position plus
    that one exit's overhead.
    """
    seg_prefix = np.cumsum(costs.segment_cost)
    rows = []
    for pos0 in range(trace.position_count):
        for k0 in range(trace.candidates[pos0]):
            accuracy = float(np.sum(trace.correct[pos0][:, k0])) / trace.sample_count
            complexity = float(seg_prefix[pos0] + costs.exit_cost[pos0][k0 + 1])
            rows.append((pos0 + 1, k0 + 1, accuracy, complexity))
    return rows
