"""Exit partition, relative accuracy/complexity and the search objective.

Given a configuration (one exit candidate and threshold per position), a
sample exits at the first position whose enabled exit reports confidence at
or above the threshold; the final position has threshold 0 and catches
everything.  From the resulting partition this module computes

* ``E_n``  - samples exiting at position n,
* ``EC_n`` - of those, how many were predicted correctly,
* ``A``    - total correct over ``M * a_ori`` (may exceed 1),
* ``C``    - mean executed cost, where a sample exiting at position n pays
  every segment cost and every enabled exit's overhead at positions <= n,
  whether or not those exits fired,
* ``f``    - ``lam * (1 - A) + (1 - lam) * C``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidLambda, ShapeMismatch
from .trace import CostModel, ExitTrace


@dataclass(frozen=True)
class ExitConfig:
    """Per-position exit choice ``k`` (0 = disabled) and threshold ``t``.

    The last position is always the original head with threshold 0.
    Thresholds of disabled positions are stored canonically as 1.0.
    """

    k: tuple[int, ...]
    t: tuple[float, ...]

    def __post_init__(self):
        k = tuple(int(v) for v in self.k)
        t = tuple(float(v) for v in self.t)
        if len(k) != len(t) or not k:
            raise ShapeMismatch("k and t must be non-empty lists of equal length")
        if any(v < 0 for v in k):
            raise ShapeMismatch("exit indices must be non-negative")
        if k[-1] != 1 or t[-1] != 0.0:
            raise ShapeMismatch("final position must be the original head with threshold 0")
        t = tuple(1.0 if k[i] == 0 else t[i] for i in range(len(k)))
        if any(not 0.0 <= v <= 1.0 for v in t):
            raise ShapeMismatch("thresholds must be within [0, 1]")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "t", t)

    @classmethod
    def empty(cls, position_count: int) -> "ExitConfig":
        """All early exits disabled; only the final head fires."""
        if position_count < 1:
            raise ShapeMismatch("need at least one position")
        k = (0,) * (position_count - 1) + (1,)
        t = (1.0,) * (position_count - 1) + (0.0,)
        return cls(k=k, t=t)

    def substituted(self, position: int, k_c: int, t_c: float) -> "ExitConfig":
        """Copy with 1-based ``position`` replaced by candidate ``k_c`` at ``t_c``."""
        if not 1 <= position < len(self.k):
            raise ShapeMismatch(f"position {position} is not replaceable")
        idx = position - 1
        k = self.k[:idx] + (k_c,) + self.k[idx + 1:]
        t = self.t[:idx] + (t_c,) + self.t[idx + 1:]
        return ExitConfig(k=k, t=t)


@dataclass(frozen=True)
class MetricsReport:
    """Counts and derived metrics for one (trace, config, lambda) evaluation."""

    exit_count: tuple[int, ...]
    exit_correct: tuple[int, ...]
    per_exit_accuracy: tuple[float | None, ...]
    relative_accuracy: float
    relative_complexity: float
    objective: float
    lam: float

    def to_json_dict(self) -> dict:
        return {
            "E": list(self.exit_count),
            "EC": list(self.exit_correct),
            "A": self.relative_accuracy,
            "C": self.relative_complexity,
            "f": self.objective,
            "lambda": self.lam,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "MetricsReport":
        e = tuple(int(v) for v in data["E"])
        ec = tuple(int(v) for v in data["EC"])
        per_exit = tuple(
            (ec[i] / e[i]) if e[i] > 0 else None for i in range(len(e))
        )
        return cls(
            exit_count=e,
            exit_correct=ec,
            per_exit_accuracy=per_exit,
            relative_accuracy=float(data["A"]),
            relative_complexity=float(data["C"]),
            objective=float(data["f"]),
            lam=float(data["lambda"]),
        )


def check_lambda(lam: float) -> float:
    if not 0.0 <= lam <= 1.0:
        raise InvalidLambda(f"lambda out of range [0, 1]: {lam!r}")
    return float(lam)


def check_shapes(trace: ExitTrace, config: ExitConfig) -> None:
    if len(config.k) != trace.position_count:
        raise ShapeMismatch(
            f"config covers {len(config.k)} positions, trace has {trace.position_count}"
        )
    for pos0, k in enumerate(config.k):
        if k > trace.candidates[pos0]:
            raise ShapeMismatch(
                f"exit {k} not available at position {pos0 + 1} "
                f"(K={trace.candidates[pos0]})"
            )


def path_cost_prefix(costs: CostModel, k: tuple[int, ...]) -> np.ndarray:
    """Cumulative cost of executing through each position under exit choice k."""
    selected = np.array(
        [costs.exit_cost[pos0][k[pos0]] for pos0 in range(len(k))], dtype=np.float64
    )
    return np.cumsum(costs.segment_cost + selected)


def partition_arrays(trace: ExitTrace, config: ExitConfig) -> list[np.ndarray]:
    """Sample indices exiting at each position (0-based list, ascending ids)."""
    check_shapes(trace, config)
    remaining = np.ones(trace.sample_count, dtype=bool)
    parts: list[np.ndarray] = []
    for pos0 in range(trace.position_count):
        k = config.k[pos0]
        if k == 0:
            parts.append(np.empty(0, dtype=np.int64))
            continue
        fired = remaining & (trace.confidence[pos0][:, k - 1] >= config.t[pos0])
        parts.append(np.flatnonzero(fired))
        remaining &= ~fired
    assert not remaining.any(), "final exit with threshold 0 must catch every sample"
    return parts


def exit_partition(trace: ExitTrace, config: ExitConfig) -> list[set[int]]:
    """Disjoint per-position sample sets whose union is all samples."""
    return [set(int(i) for i in part) for part in partition_arrays(trace, config)]


def report_from_counts(
    exit_count: np.ndarray,
    exit_correct: np.ndarray,
    sample_count: int,
    costs: CostModel,
    config: ExitConfig,
    lam: float,
) -> MetricsReport:
    """Assemble a report from already-aggregated counts.

    Shared by the set-formula evaluation and the per-sample simulation so the
    derived reals agree bit-for-bit whenever the counts agree.
    """
    prefix = path_cost_prefix(costs, config.k)
    a = float(np.sum(exit_correct)) / (sample_count * costs.base_accuracy)
    c = float(exit_count @ prefix) / sample_count
    f = lam * (1.0 - a) + (1.0 - lam) * c
    per_exit = tuple(
        (int(exit_correct[i]) / int(exit_count[i])) if exit_count[i] > 0 else None
        for i in range(len(exit_count))
    )
    return MetricsReport(
        exit_count=tuple(int(v) for v in exit_count),
        exit_correct=tuple(int(v) for v in exit_correct),
        per_exit_accuracy=per_exit,
        relative_accuracy=a,
        relative_complexity=c,
        objective=f,
        lam=lam,
    )


def evaluate(
    trace: ExitTrace, costs: CostModel, config: ExitConfig, lam: float
) -> MetricsReport:
    """Exact metrics for a configuration via the set formulas."""
    lam = check_lambda(lam)
    parts = partition_arrays(trace, config)
    n = trace.position_count
    exit_count = np.zeros(n, dtype=np.int64)
    exit_correct = np.zeros(n, dtype=np.int64)
    for pos0, part in enumerate(parts):
        exit_count[pos0] = part.size
        if part.size:
            k = config.k[pos0]
            exit_correct[pos0] = int(trace.correct[pos0][part, k - 1].sum())
    return report_from_counts(
        exit_count, exit_correct, trace.sample_count, costs, config, lam
    )
