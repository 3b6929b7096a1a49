"""Per-sample exit walk and the configuration store for runtime switching.

``walk_sample`` replays the controller loop literally, one sample at a time:
run a segment, ask the enabled exit for its confidence, stop when it reaches
the threshold.  ``simulate`` aggregates walks over the whole trace and must
agree exactly with the set-formula metrics; that agreement is the module's
central invariant and the CLI refuses to emit results that break it.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import Infeasible, SampleOutOfRange, ShapeMismatch
from .metrics import ExitConfig, MetricsReport, check_lambda, check_shapes, report_from_counts
from .search import FrontierEntry
from .trace import CostModel, ExitTrace, dumps_canonical

import numpy as np


@dataclass(frozen=True)
class SampleOutcome:
    """Where one sample left the model and what that cost."""

    sample_id: int
    exit_position: int
    exit_index: int
    confidence: float
    correct: bool
    cost: float


def walk_sample(
    trace: ExitTrace, costs: CostModel, config: ExitConfig, sample_id: int
) -> SampleOutcome:
    """Replay the runtime controller for one sample.

    Visits positions in order, skips disabled ones, and exits at the first
    whose confidence is at or above its threshold; the final position always
    fires.  The cost covers every visited segment plus every enabled exit
    along the way, fired or not.
    """
    check_shapes(trace, config)
    if not 0 <= sample_id < trace.sample_count:
        raise SampleOutOfRange(
            f"sample {sample_id} outside 0..{trace.sample_count - 1}"
        )
    cost = 0.0
    for pos0 in range(trace.position_count):
        k = config.k[pos0]
        cost += float(costs.segment_cost[pos0]) + float(costs.exit_cost[pos0][k])
        if k == 0:
            continue
        confidence = float(trace.confidence[pos0][sample_id, k - 1])
        if confidence >= config.t[pos0]:
            return SampleOutcome(
                sample_id=sample_id,
                exit_position=pos0 + 1,
                exit_index=k,
                confidence=confidence,
                correct=bool(trace.correct[pos0][sample_id, k - 1]),
                cost=cost,
            )
    raise AssertionError("final exit with threshold 0 must have fired")


def simulate(
    trace: ExitTrace, costs: CostModel, config: ExitConfig, lam: float
) -> tuple[list[SampleOutcome], MetricsReport]:
    """Walk every sample and aggregate the outcomes into a metrics report."""
    lam = check_lambda(lam)
    outcomes = [
        walk_sample(trace, costs, config, sample_id)
        for sample_id in range(trace.sample_count)
    ]
    n = trace.position_count
    exit_count = np.zeros(n, dtype=np.int64)
    exit_correct = np.zeros(n, dtype=np.int64)
    for outcome in outcomes:
        exit_count[outcome.exit_position - 1] += 1
        exit_correct[outcome.exit_position - 1] += int(outcome.correct)
    report = report_from_counts(
        exit_count, exit_correct, trace.sample_count, costs, config, lam
    )
    return outcomes, report


@dataclass
class ConfigStore:
    """Sorted, unique-by-lambda collection of frontier entries with one
    active entry.  Switching is a table lookup; entries are never mutated."""

    entries: list[FrontierEntry]
    active_index: int = 0

    def __post_init__(self):
        if not self.entries:
            raise ShapeMismatch("config store needs at least one entry")
        self.entries = sorted(self.entries, key=lambda e: e.lam)
        lams = [e.lam for e in self.entries]
        if len(set(lams)) != len(lams):
            raise ShapeMismatch("config store lambdas must be unique")
        if not 0 <= self.active_index < len(self.entries):
            raise ShapeMismatch("active index outside the stored entries")

    @property
    def active(self) -> FrontierEntry:
        return self.entries[self.active_index]

    def save(self, store_dir: str | Path) -> list[Path]:
        out = Path(store_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for entry in self.entries:
            path = out / f"{entry.lam!r}.json"
            path.write_text(dumps_canonical(entry.to_json_dict()))
            paths.append(path)
        return paths

    @classmethod
    def load(cls, store_dir: str | Path) -> "ConfigStore":
        out = Path(store_dir)
        files = sorted(out.glob("*.json"))
        if not files:
            raise ShapeMismatch(f"no stored configurations under {out}")
        import json

        entries = [FrontierEntry.from_json_dict(json.loads(p.read_text())) for p in files]
        return cls(entries=entries)


def switch_config(
    store: ConfigStore,
    lam: float | None = None,
    max_complexity: float | None = None,
    min_accuracy: float | None = None,
) -> FrontierEntry:
    """Pick the active entry by lambda, a complexity budget or an accuracy floor.

    Exactly one selector must be given.  Lambda requests pick the nearest
    stored value (ties toward the lower one); a complexity budget picks the
    highest-accuracy entry within it; an accuracy floor picks the cheapest
    entry meeting it.  Raises ``Infeasible`` naming the nearest miss when no
    entry qualifies.
    """
    selectors = [v is not None for v in (lam, max_complexity, min_accuracy)]
    if sum(selectors) != 1:
        raise ValueError("pass exactly one of lam, max_complexity, min_accuracy")

    entries = store.entries
    if lam is not None:
        best = min(enumerate(entries), key=lambda ie: (abs(ie[1].lam - lam), ie[1].lam))
        store.active_index = best[0]
        return best[1]

    if max_complexity is not None:
        feasible = [
            (i, e) for i, e in enumerate(entries)
            if e.metrics.relative_complexity <= max_complexity
        ]
        if not feasible:
            miss = min(entries, key=lambda e: e.metrics.relative_complexity)
            raise Infeasible(
                f"no stored entry has C <= {max_complexity!r}; nearest is "
                f"lambda={miss.lam!r} with C={miss.metrics.relative_complexity!r}"
            )
        best = max(
            feasible,
            key=lambda ie: (
                ie[1].metrics.relative_accuracy,
                -ie[1].metrics.relative_complexity,
                -ie[1].lam,
            ),
        )
        store.active_index = best[0]
        return best[1]

    feasible = [
        (i, e) for i, e in enumerate(entries)
        if e.metrics.relative_accuracy >= min_accuracy
    ]
    if not feasible:
        miss = max(entries, key=lambda e: e.metrics.relative_accuracy)
        raise Infeasible(
            f"no stored entry has A >= {min_accuracy!r}; nearest is "
            f"lambda={miss.lam!r} with A={miss.metrics.relative_accuracy!r}"
        )
    best = min(
        feasible,
        key=lambda ie: (
            ie[1].metrics.relative_complexity,
            -ie[1].metrics.relative_accuracy,
            ie[1].lam,
        ),
    )
    store.active_index = best[0]
    return best[1]
