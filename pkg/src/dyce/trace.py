"""Exit-trace and cost-model data structures, on-disk formats, loading and validation.

A trace records, for every evaluation sample and every candidate exit, the
exit's confidence (max of its predicted class-probability vector) and whether
its argmax prediction was correct.  A cost model carries the normalized
per-segment compute costs ``S`` (summing to 1), the per-exit overheads
``delta`` and the original model's accuracy ``a_ori``.  Everything downstream
treats a loaded pair as immutable.

On-disk layout (one directory per trace):

``manifest.json``::

    {"version": 1, "name": str, "M": int, "N": int, "K": [int x N],
     "S": [real x N], "delta": [[real x (K_n+1)] x N], "a_ori": real,
     "trace": "trace.csv"}

``trace.csv``: header ``sample_id,position,exit_index,confidence,correct``
with ``sample_id`` in 0..M-1, ``position`` in 1..N, ``exit_index`` in 1..K_n,
``confidence`` a decimal with up to 9 significant digits (shortest
round-trip) and ``correct`` in {0, 1}.  Row order is arbitrary; duplicate
(sample, position, exit) rows are errors.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidShape, InvariantViolation, MissingFile, SchemaViolation

MANIFEST_NAME = "manifest.json"
TRACE_COLUMNS = ("sample_id", "position", "exit_index", "confidence", "correct")
SEGMENT_SUM_TOL = 1e-6
BASE_ACCURACY_TOL = 1e-9
CONFIDENCE_SIG_DIGITS = 9


def round_confidence(x: float) -> float:
    """Round to 9 significant decimal digits, the trace format's precision."""
    return float(f"{x:.{CONFIDENCE_SIG_DIGITS}g}")


def _round_confidence_array(a: np.ndarray) -> np.ndarray:
    flat = np.array([round_confidence(v) for v in a.ravel()], dtype=np.float64)
    return flat.reshape(a.shape)


def format_number(x: float) -> str:
    """Shortest decimal string that parses back to the same float."""
    return repr(float(x))


def dumps_canonical(obj) -> str:
    """Deterministic JSON serialization used for every file this package emits."""
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class ExitTrace:
    """Recorded confidences and correctness flags for every candidate exit.

    ``confidence[n]`` and ``correct[n]`` are read-only arrays of shape
    ``(sample_count, candidates[n])``; column ``k-1`` holds exit candidate
    ``k`` (candidate 0 is "no exit" and has no recorded data).  Positions are
    1-based in file formats and public APIs, 0-based as tuple indices here.
    """

    sample_count: int
    position_count: int
    candidates: tuple[int, ...]
    confidence: tuple[np.ndarray, ...]
    correct: tuple[np.ndarray, ...]

    def __post_init__(self):
        m, n = self.sample_count, self.position_count
        if m < 1 or n < 1:
            raise InvalidShape(f"need at least one sample and one position, got M={m}, N={n}")
        if len(self.candidates) != n:
            raise InvalidShape(
                f"candidate list has length {len(self.candidates)}, expected N={n}"
            )
        if any(k < 0 for k in self.candidates):
            raise InvalidShape("candidate counts must be non-negative")
        if self.candidates[-1] < 1:
            raise InvalidShape("final position must keep the original head (K_N >= 1)")
        if len(self.confidence) != n or len(self.correct) != n:
            raise InvalidShape("confidence/correct tuples must have one entry per position")
        conf = []
        corr = []
        for pos0, k_n in enumerate(self.candidates):
            c = np.ascontiguousarray(self.confidence[pos0], dtype=np.float64)
            r = np.ascontiguousarray(self.correct[pos0], dtype=np.uint8)
            if c.shape != (m, k_n) or r.shape != (m, k_n):
                raise InvalidShape(
                    f"position {pos0 + 1}: expected arrays of shape ({m}, {k_n})"
                )
            bad = np.argwhere((c < 0.0) | (c > 1.0) | ~np.isfinite(c))
            if bad.size:
                mm, kk = bad[0]
                raise InvariantViolation(
                    f"confidence out of range [0,1] at sample {mm}, "
                    f"position {pos0 + 1}, exit {kk + 1}: {c[mm, kk]!r}"
                )
            bad = np.argwhere(r > 1)
            if bad.size:
                mm, kk = bad[0]
                raise InvariantViolation(
                    f"correct flag not in {{0,1}} at sample {mm}, "
                    f"position {pos0 + 1}, exit {kk + 1}"
                )
            c.setflags(write=False)
            r.setflags(write=False)
            conf.append(c)
            corr.append(r)
        object.__setattr__(self, "candidates", tuple(int(k) for k in self.candidates))
        object.__setattr__(self, "confidence", tuple(conf))
        object.__setattr__(self, "correct", tuple(corr))


@dataclass(frozen=True)
class CostModel:
    """Normalized segment costs, per-exit overheads and the base accuracy.

    ``segment_cost`` sums to 1 over the backbone; ``exit_cost[n][k]`` is the
    overhead of candidate ``k`` at position ``n+1`` with ``exit_cost[n][0] == 0``
    (disabled).  The original head is candidate 1 at the last position, so the
    unmodified model costs ``1 + exit_cost[-1][1]`` in total.
    """

    segment_cost: np.ndarray
    exit_cost: tuple[np.ndarray, ...]
    base_accuracy: float

    def __post_init__(self):
        s = np.ascontiguousarray(self.segment_cost, dtype=np.float64)
        if s.ndim != 1 or s.size < 1:
            raise InvalidShape("segment costs must be a non-empty 1-d sequence")
        if np.any(s < 0):
            n = int(np.argwhere(s < 0)[0])
            raise InvariantViolation(f"segment cost at position {n + 1} is negative")
        total = float(np.sum(s))
        if abs(total - 1.0) > SEGMENT_SUM_TOL:
            raise InvariantViolation(f"segment costs sum to {total:g}")
        if len(self.exit_cost) != s.size:
            raise InvalidShape("exit cost table must have one row per position")
        rows = []
        for pos0, row in enumerate(self.exit_cost):
            d = np.ascontiguousarray(row, dtype=np.float64)
            if d.ndim != 1 or d.size < 1:
                raise InvalidShape(f"exit cost row {pos0 + 1} must be 1-d and non-empty")
            if d[0] != 0.0:
                raise InvariantViolation(
                    f"exit cost for disabled candidate must be 0 at position {pos0 + 1}"
                )
            if np.any(d < 0):
                k = int(np.argwhere(d < 0)[0])
                raise InvariantViolation(
                    f"exit cost at position {pos0 + 1}, candidate {k} is negative"
                )
            d.setflags(write=False)
            rows.append(d)
        if not 0.0 < float(self.base_accuracy) <= 1.0:
            raise InvariantViolation(
                f"base accuracy must be in (0, 1], got {self.base_accuracy!r}"
            )
        s.setflags(write=False)
        object.__setattr__(self, "segment_cost", s)
        object.__setattr__(self, "exit_cost", tuple(rows))
        object.__setattr__(self, "base_accuracy", float(self.base_accuracy))


def validate_pair(trace: ExitTrace, costs: CostModel) -> None:
    """Cross-check a trace against its cost model; raises on any violation."""
    n = trace.position_count
    if costs.segment_cost.size != n:
        raise InvalidShape(
            f"cost model covers {costs.segment_cost.size} positions, trace has {n}"
        )
    for pos0, k_n in enumerate(trace.candidates):
        if costs.exit_cost[pos0].size != k_n + 1:
            raise InvalidShape(
                f"exit cost row at position {pos0 + 1} has "
                f"{costs.exit_cost[pos0].size} entries, expected {k_n + 1}"
            )
    head_acc = float(np.sum(trace.correct[-1][:, 0])) / trace.sample_count
    if abs(head_acc - costs.base_accuracy) > BASE_ACCURACY_TOL:
        raise InvariantViolation(
            f"a_ori={costs.base_accuracy!r} does not match the final-exit "
            f"correct fraction {head_acc!r}"
        )


def _require(manifest: dict, key: str, kind, where: str):
    if key not in manifest:
        raise SchemaViolation(f"{where}: missing field {key!r}")
    value = manifest[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaViolation(f"{where}: field {key!r} must be a number")
        return float(value)
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise SchemaViolation(f"{where}: field {key!r} must be an integer")
    if not isinstance(value, kind):
        raise SchemaViolation(f"{where}: field {key!r} must be {kind.__name__}")
    return value


def _int_field(raw: str, name: str, where: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise SchemaViolation(f"{where}: column {name!r} must be an integer, got {raw!r}") from None


def load_trace(manifest_path: str | Path) -> tuple[ExitTrace, CostModel]:
    """Load and validate a trace directory or manifest file.

    Accepts either the manifest path itself or the directory containing
    ``manifest.json``.  Returns an immutable ``(ExitTrace, CostModel)`` pair;
    raises ``MissingFile``, ``SchemaViolation`` or ``InvariantViolation`` with
    the offending record named.
    """
    path = Path(manifest_path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.is_file():
        raise MissingFile(f"manifest not found: {path}")
    where = str(path)
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{where}: not valid JSON ({exc})") from None
    if not isinstance(manifest, dict):
        raise SchemaViolation(f"{where}: manifest must be a JSON object")

    version = _require(manifest, "version", int, where)
    if version != 1:
        raise SchemaViolation(f"{where}: unsupported version {version}")
    _require(manifest, "name", str, where)
    m = _require(manifest, "M", int, where)
    n = _require(manifest, "N", int, where)
    if m < 1 or n < 1:
        raise InvariantViolation(f"{where}: M and N must be at least 1")
    k_list = _require(manifest, "K", list, where)
    if len(k_list) != n or not all(isinstance(k, int) and not isinstance(k, bool) for k in k_list):
        raise SchemaViolation(f"{where}: field 'K' must be a list of {n} integers")
    s_list = _require(manifest, "S", list, where)
    if len(s_list) != n:
        raise SchemaViolation(f"{where}: field 'S' must be a list of {n} numbers")
    delta = _require(manifest, "delta", list, where)
    if len(delta) != n:
        raise SchemaViolation(f"{where}: field 'delta' must have one row per position")
    for pos0, row in enumerate(delta):
        if not isinstance(row, list) or len(row) != k_list[pos0] + 1:
            raise SchemaViolation(
                f"{where}: delta row for position {pos0 + 1} must have K_n+1 entries"
            )
    a_ori = _require(manifest, "a_ori", float, where)
    trace_rel = _require(manifest, "trace", str, where)

    trace_path = path.parent / trace_rel
    if not trace_path.is_file():
        raise MissingFile(f"trace data not found: {trace_path}")

    conf = [np.zeros((m, k), dtype=np.float64) for k in k_list]
    corr = [np.zeros((m, k), dtype=np.uint8) for k in k_list]
    seen = [np.zeros((m, k), dtype=bool) for k in k_list]
    t_where = str(trace_path)
    with open(trace_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRACE_COLUMNS:
            raise SchemaViolation(
                f"{t_where}: header must be {','.join(TRACE_COLUMNS)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise SchemaViolation(f"{t_where}:{lineno}: expected 5 columns")
            loc = f"{t_where}:{lineno}"
            sid = _int_field(row[0], "sample_id", loc)
            pos = _int_field(row[1], "position", loc)
            k = _int_field(row[2], "exit_index", loc)
            try:
                c = float(row[3])
            except ValueError:
                raise SchemaViolation(f"{loc}: confidence must be a decimal, got {row[3]!r}") from None
            flag = _int_field(row[4], "correct", loc)
            if not 0 <= sid < m:
                raise InvariantViolation(f"{loc}: sample_id {sid} outside 0..{m - 1}")
            if not 1 <= pos <= n:
                raise InvariantViolation(f"{loc}: position {pos} outside 1..{n}")
            if not 1 <= k <= k_list[pos - 1]:
                raise InvariantViolation(
                    f"{loc}: exit_index {k} outside 1..{k_list[pos - 1]} at position {pos}"
                )
            if not 0.0 <= c <= 1.0:
                raise InvariantViolation(
                    f"{loc}: confidence out of range [0,1] at sample {sid}, "
                    f"position {pos}, exit {k}: {row[3]}"
                )
            if flag not in (0, 1):
                raise InvariantViolation(
                    f"{loc}: correct flag must be 0 or 1 at sample {sid}, "
                    f"position {pos}, exit {k}"
                )
            if seen[pos - 1][sid, k - 1]:
                raise InvariantViolation(
                    f"{loc}: duplicate row for sample {sid}, position {pos}, exit {k}"
                )
            seen[pos - 1][sid, k - 1] = True
            conf[pos - 1][sid, k - 1] = c
            corr[pos - 1][sid, k - 1] = flag

    for pos0, k_n in enumerate(k_list):
        for k0 in range(k_n):
            count = int(seen[pos0][:, k0].sum())
            if count != m:
                raise InvariantViolation(
                    f"{t_where}: exit (position {pos0 + 1}, index {k0 + 1}) has "
                    f"{count} rows, expected {m}"
                )

    trace = ExitTrace(
        sample_count=m,
        position_count=n,
        candidates=tuple(k_list),
        confidence=tuple(conf),
        correct=tuple(corr),
    )
    costs = CostModel(
        segment_cost=np.asarray(s_list, dtype=np.float64),
        exit_cost=tuple(np.asarray(row, dtype=np.float64) for row in delta),
        base_accuracy=a_ori,
    )
    validate_pair(trace, costs)
    return trace, costs


def write_trace(
    trace: ExitTrace, costs: CostModel, out_dir: str | Path, name: str = "trace"
) -> Path:
    """Write ``manifest.json`` and ``trace.csv`` into ``out_dir``.

    Confidences are normalized to 9 significant digits on write; traces
    produced by this package already carry such values, so
    ``load_trace(write_trace(x)) == x`` bit-exactly.  Returns the manifest path.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace_name = "trace.csv"
    with open(out / trace_name, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for pos0 in range(trace.position_count):
            for k0 in range(trace.candidates[pos0]):
                col_c = trace.confidence[pos0][:, k0]
                col_r = trace.correct[pos0][:, k0]
                for sid in range(trace.sample_count):
                    writer.writerow(
                        [
                            sid,
                            pos0 + 1,
                            k0 + 1,
                            format_number(round_confidence(col_c[sid])),
                            int(col_r[sid]),
                        ]
                    )
    manifest = {
        "version": 1,
        "name": name,
        "M": trace.sample_count,
        "N": trace.position_count,
        "K": list(trace.candidates),
        "S": [float(v) for v in costs.segment_cost],
        "delta": [[float(v) for v in row] for row in costs.exit_cost],
        "a_ori": float(costs.base_accuracy),
        "trace": trace_name,
    }
    manifest_path = out / MANIFEST_NAME
    manifest_path.write_text(dumps_canonical(manifest))
    return manifest_path


def synthesize_trace(
    seed: int,
    samples: int,
    positions: int,
    candidates: Sequence[int],
    calibration: float = 0.8,
) -> tuple[ExitTrace, CostModel]:
    """Generate a deterministic pseudo-random trace with a paired cost model.

    Per exit, the probability of a correct flag rises with confidence at
    strength ``calibration``: 0 makes correctness independent of confidence,
    1 makes a sample correct exactly when its confidence is above the exit's
    accuracy quantile.  Later positions get stochastically higher standalone
    accuracy.  Segment costs are drawn positive and normalized to sum 1.
    Pure function of its arguments.
    """
    if samples < 1 or positions < 1:
        raise InvalidShape(f"need samples >= 1 and positions >= 1, got {samples}, {positions}")
    candidates = tuple(int(k) for k in candidates)
    if len(candidates) != positions:
        raise InvalidShape(
            f"candidate list has length {len(candidates)}, expected {positions}"
        )
    if any(k < 0 for k in candidates):
        raise InvalidShape("candidate counts must be non-negative")
    if candidates[-1] < 1:
        raise InvalidShape("final position needs at least the original head (K_N >= 1)")
    if not 0.0 <= calibration <= 1.0:
        raise InvalidShape(f"calibration must be in [0, 1], got {calibration!r}")

    rng = np.random.default_rng(seed)
    conf_all: list[np.ndarray] = []
    corr_all: list[np.ndarray] = []
    for pos0 in range(positions):
        k_n = candidates[pos0]
        conf = np.zeros((samples, k_n), dtype=np.float64)
        corr = np.zeros((samples, k_n), dtype=np.uint8)
        base_acc = 0.4 + 0.5 * (pos0 + 1) / positions
        for k0 in range(k_n):
            acc = float(np.clip(base_acc + rng.uniform(-0.08, 0.08), 0.05, 0.98))
            c = _round_confidence_array(rng.random(samples))
            n_correct = int(round(acc * samples))
            n_correct = min(max(n_correct, 0), samples)
            order = np.argsort(c, kind="stable")
            top = np.zeros(samples, dtype=bool)
            if n_correct > 0:
                top[order[samples - n_correct:]] = True
            p_correct = (1.0 - calibration) * acc + calibration * top.astype(np.float64)
            flags = (rng.random(samples) < p_correct).astype(np.uint8)
            if pos0 == positions - 1 and k0 == 0 and int(flags.sum()) == 0:
                flags[int(np.argmax(c))] = 1  # base accuracy must stay positive
            conf[:, k0] = c
            corr[:, k0] = flags
        conf_all.append(conf)
        corr_all.append(corr)

    seg = rng.uniform(0.5, 1.5, positions)
    seg = seg / seg.sum()
    exit_cost = tuple(
        np.concatenate(([0.0], rng.uniform(0.005, 0.05, candidates[pos0])))
        for pos0 in range(positions)
    )
    a_ori = float(np.sum(corr_all[-1][:, 0])) / samples

    trace = ExitTrace(
        sample_count=samples,
        position_count=positions,
        candidates=candidates,
        confidence=tuple(conf_all),
        correct=tuple(corr_all),
    )
    costs = CostModel(segment_cost=seg, exit_cost=exit_cost, base_accuracy=a_ori)
    validate_pair(trace, costs)
    return trace, costs
