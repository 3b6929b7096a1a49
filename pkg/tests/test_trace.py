import json

import numpy as np
import pytest

from dyce import (
    CostModel,
    ExitTrace,
    InvalidShape,
    InvariantViolation,
    MissingFile,
    SchemaViolation,
    load_trace,
    synthesize_trace,
    validate_pair,
    write_trace,
)

T4_MANIFEST = {
    "version": 1,
    "name": "t4",
    "M": 4,
    "N": 2,
    "K": [1, 1],
    "S": [0.4, 0.6],
    "delta": [[0.0, 0.05], [0.0, 0.0]],
    "a_ori": 0.75,
    "trace": "trace.csv",
}

T4_ROWS = [
    "sample_id,position,exit_index,confidence,correct",
    "0,1,1,0.9,1",
    "1,1,1,0.6,0",
    "2,1,1,0.8,1",
    "3,1,1,0.3,1",
    "0,2,1,1,1",
    "1,2,1,1,1",
    "2,2,1,1,0",
    "3,2,1,1,1",
]


def write_t4(tmp_path, manifest=None, rows=None):
    (tmp_path / "manifest.json").write_text(json.dumps(manifest or T4_MANIFEST))
    (tmp_path / "trace.csv").write_text("\n".join(rows or T4_ROWS) + "\n")
    return tmp_path


def test_load_t4_matches_source_rows(tmp_path):
    load_dir = write_t4(tmp_path)
    trace, costs = load_trace(load_dir)
    assert trace.sample_count == 4
    assert trace.position_count == 2
    assert trace.candidates == (1, 1)
    # oracle: re-derive every field from the CSV rows above
    assert trace.confidence[0][:, 0].tolist() == [0.9, 0.6, 0.8, 0.3]
    assert trace.correct[0][:, 0].tolist() == [1, 0, 1, 1]
    assert trace.confidence[1][:, 0].tolist() == [1.0, 1.0, 1.0, 1.0]
    assert trace.correct[1][:, 0].tolist() == [1, 1, 0, 1]
    assert costs.segment_cost.tolist() == [0.4, 0.6]
    assert [row.tolist() for row in costs.exit_cost] == [[0.0, 0.05], [0.0, 0.0]]
    assert costs.base_accuracy == 0.75


def test_load_accepts_manifest_path_directly(tmp_path):
    write_t4(tmp_path)
    trace, _ = load_trace(tmp_path / "manifest.json")
    assert trace.sample_count == 4


def test_segment_costs_must_sum_to_one(tmp_path):
    manifest = dict(T4_MANIFEST, S=[0.5, 0.6])
    write_t4(tmp_path, manifest=manifest)
    with pytest.raises(InvariantViolation, match="segment costs sum to 1.1"):
        load_trace(tmp_path)


def test_confidence_out_of_range_names_the_record(tmp_path):
    rows = list(T4_ROWS)
    rows[1] = "0,1,1,1.2,1"
    write_t4(tmp_path, rows=rows)
    with pytest.raises(InvariantViolation) as err:
        load_trace(tmp_path)
    message = str(err.value)
    assert "sample 0" in message and "position 1" in message and "exit 1" in message


def test_missing_manifest(tmp_path):
    with pytest.raises(MissingFile):
        load_trace(tmp_path / "nope")


def test_missing_trace_file(tmp_path):
    (tmp_path / "manifest.json").write_text(json.dumps(T4_MANIFEST))
    with pytest.raises(MissingFile):
        load_trace(tmp_path)


@pytest.mark.parametrize(
    "mutation",
    [
        lambda m: m.pop("K"),
        lambda m: m.update(M="four"),
        lambda m: m.update(K=[1]),
        lambda m: m.update(delta=[[0.0], [0.0, 0.0]]),
        lambda m: m.update(version=2),
    ],
)
def test_schema_violations(tmp_path, mutation):
    manifest = json.loads(json.dumps(T4_MANIFEST))
    mutation(manifest)
    write_t4(tmp_path, manifest=manifest)
    with pytest.raises(SchemaViolation):
        load_trace(tmp_path)


def test_duplicate_row_rejected(tmp_path):
    write_t4(tmp_path, rows=T4_ROWS + ["0,1,1,0.9,1"])
    with pytest.raises(InvariantViolation, match="duplicate"):
        load_trace(tmp_path)


def test_missing_rows_rejected(tmp_path):
    write_t4(tmp_path, rows=T4_ROWS[:-1])
    with pytest.raises(InvariantViolation, match="position 2"):
        load_trace(tmp_path)


def test_bad_correct_flag_rejected(tmp_path):
    rows = list(T4_ROWS)
    rows[1] = "0,1,1,0.9,2"
    write_t4(tmp_path, rows=rows)
    with pytest.raises(InvariantViolation, match="correct flag"):
        load_trace(tmp_path)


def test_a_ori_must_match_final_flags(tmp_path):
    write_t4(tmp_path, manifest=dict(T4_MANIFEST, a_ori=0.8))
    with pytest.raises(InvariantViolation, match="a_ori"):
        load_trace(tmp_path)


def test_delta_zero_column_enforced(tmp_path):
    manifest = dict(T4_MANIFEST, delta=[[0.1, 0.05], [0.0, 0.0]])
    write_t4(tmp_path, manifest=manifest)
    with pytest.raises(InvariantViolation, match="disabled candidate"):
        load_trace(tmp_path)


def test_round_trip_t4(tmp_path, t4):
    trace, costs = t4
    manifest = write_trace(trace, costs, tmp_path / "out", name="t4")
    loaded_trace, loaded_costs = load_trace(manifest)
    for pos0 in range(trace.position_count):
        assert np.array_equal(loaded_trace.confidence[pos0], trace.confidence[pos0])
        assert np.array_equal(loaded_trace.correct[pos0], trace.correct[pos0])
    assert np.array_equal(loaded_costs.segment_cost, costs.segment_cost)
    for a, b in zip(loaded_costs.exit_cost, costs.exit_cost):
        assert np.array_equal(a, b)
    assert loaded_costs.base_accuracy == costs.base_accuracy


@pytest.mark.parametrize("seed,m,n,k", [(7, 50, 3, (2, 0, 1)), (2, 200, 5, (2, 2, 2, 2, 1))])
def test_round_trip_synthesized(tmp_path, seed, m, n, k):
    trace, costs = synthesize_trace(seed, m, n, k, calibration=0.8)
    manifest = write_trace(trace, costs, tmp_path / "synth")
    loaded_trace, loaded_costs = load_trace(manifest)
    for pos0 in range(n):
        assert np.array_equal(loaded_trace.confidence[pos0], trace.confidence[pos0])
        assert np.array_equal(loaded_trace.correct[pos0], trace.correct[pos0])
    assert np.array_equal(loaded_costs.segment_cost, costs.segment_cost)
    assert loaded_costs.base_accuracy == costs.base_accuracy


def test_synthesize_is_pure():
    first = synthesize_trace(3, 40, 4, (1, 2, 0, 1), calibration=0.5)
    second = synthesize_trace(3, 40, 4, (1, 2, 0, 1), calibration=0.5)
    for pos0 in range(4):
        assert np.array_equal(first[0].confidence[pos0], second[0].confidence[pos0])
        assert np.array_equal(first[0].correct[pos0], second[0].correct[pos0])
    assert np.array_equal(first[1].segment_cost, second[1].segment_cost)
    assert first[1].base_accuracy == second[1].base_accuracy


def test_synthesize_full_calibration_sorts_correct_to_top():
    trace, _ = synthesize_trace(1, 8, 2, (1, 1), calibration=1.0)
    for pos0 in range(2):
        conf = trace.confidence[pos0][:, 0]
        corr = trace.correct[pos0][:, 0]
        order = np.argsort(conf, kind="stable")
        flags = corr[order].tolist()
        # all-correct suffix: no 1 may be followed by a 0
        first_one = flags.index(1)
        assert all(v == 1 for v in flags[first_one:])


def test_synthesize_passes_validation():
    trace, costs = synthesize_trace(2, 200, 5, (2, 2, 2, 2, 1), calibration=0.8)
    validate_pair(trace, costs)
    assert abs(float(np.sum(costs.segment_cost)) - 1.0) < 1e-6
    for row in costs.exit_cost:
        assert row[0] == 0.0
    for pos0 in range(5):
        assert trace.confidence[pos0].shape == (200, trace.candidates[pos0])


def test_synthesize_rejects_bad_shapes():
    with pytest.raises(InvalidShape):
        synthesize_trace(1, 10, 3, (1, 1), calibration=0.5)
    with pytest.raises(InvalidShape):
        synthesize_trace(1, 0, 1, (1,), calibration=0.5)
    with pytest.raises(InvalidShape):
        synthesize_trace(1, 10, 2, (1, 0), calibration=0.5)
    with pytest.raises(InvalidShape):
        synthesize_trace(1, 10, 2, (1, 1), calibration=1.5)


def test_loaded_arrays_are_immutable(t4):
    trace, costs = t4
    with pytest.raises(ValueError):
        trace.confidence[0][0, 0] = 0.5
    with pytest.raises(ValueError):
        costs.segment_cost[0] = 0.2


def test_direct_construction_checks_values():
    with pytest.raises(InvariantViolation, match="confidence out of range"):
        ExitTrace(
            sample_count=1,
            position_count=1,
            candidates=(1,),
            confidence=(np.array([[1.5]]),),
            correct=(np.array([[1]], dtype=np.uint8),),
        )
    with pytest.raises(InvariantViolation, match="base accuracy"):
        CostModel(
            segment_cost=np.array([1.0]),
            exit_cost=(np.array([0.0, 0.0]),),
            base_accuracy=0.0,
        )
