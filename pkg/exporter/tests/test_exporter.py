import csv
import json
import math
import subprocess
import sys

import pytest
import torch
import torch.nn as nn

from dyce_exporter import (
    Experiment,
    ExitSpec,
    FrozenBackboneViolated,
    PooledMlpExit,
    SegmentedBackbone,
    ShapeMismatch,
    TrainRecipe,
    attach_and_train,
    make_dataset,
    module_macs,
    soft_cross_entropy,
    state_digest,
)
from dyce_exporter.experiment import DESK_EXPERIMENT


def test_dataset_is_deterministic_and_shaped():
    first = make_dataset(seed=3, train=64, val=16, eval_count=32)
    second = make_dataset(seed=3, train=64, val=16, eval_count=32)
    assert torch.equal(first.train_x, second.train_x)
    assert torch.equal(first.eval_y, second.eval_y)
    assert first.train_x.shape == (64, 3, 32, 32)
    assert first.eval_x.shape == (32, 3, 32, 32)
    assert int(first.train_y.max()) < 10


def test_exit_spec_validation():
    with pytest.raises(ValueError):
        ExitSpec(position=1, layers=2, width=500)
    with pytest.raises(ValueError):
        ExitSpec(position=1, layers=3, width=123)
    with pytest.raises(ValueError):
        ExitSpec(position=0, layers=1, width=0)
    assert ExitSpec(position=2, layers=5, width=1000).label == "mlp-5x1000"


def test_exit_head_rejects_wrong_feature_width():
    head = PooledMlpExit(ExitSpec(position=1, layers=1, width=0), in_channels=32, classes=10)
    with pytest.raises(ShapeMismatch):
        head(torch.zeros(4, 48))


def test_soft_cross_entropy_matches_manual_formula():
    torch.manual_seed(0)
    logits = torch.randn(6, 10)
    teacher = torch.softmax(torch.randn(6, 10), dim=1)
    expected = 0.0
    for i in range(6):
        log_probs = logits[i] - torch.logsumexp(logits[i], dim=0)
        expected += float(-(teacher[i] * log_probs).sum())
    expected /= 6
    assert math.isclose(float(soft_cross_entropy(logits, teacher)), expected, rel_tol=1e-6)


def test_mac_counting_against_hand_counts():
    conv = nn.Sequential(nn.Conv2d(3, 4, kernel_size=3, padding=1), nn.ReLU())
    # 8x8 output, 4 filters, 3 channels, 3x3 kernel: 8*8*4*3*9 = 6912
    assert module_macs(conv, torch.zeros(1, 3, 8, 8)) == 6912
    linear = nn.Linear(10, 5)
    assert module_macs(linear, torch.zeros(1, 10)) == 50
    strided = nn.Conv2d(3, 4, kernel_size=3, stride=2, padding=1)
    # 4x4 output after stride 2: 4*4*4*3*9 = 1728
    assert module_macs(strided, torch.zeros(1, 3, 8, 8)) == 1728


def test_unfrozen_recipe_is_refused():
    with pytest.raises(FrozenBackboneViolated):
        attach_and_train(
            SegmentedBackbone([8, 8], [1, 2], classes=10),
            [ExitSpec(position=1, layers=1, width=0)],
            TrainRecipe(freeze_backbone=False, epochs=1),
            torch.zeros(8, 3, 32, 32),
            torch.zeros(4, 3, 32, 32),
            torch.zeros(4, dtype=torch.int64),
        )


def test_exit_positions_must_be_intermediate():
    with pytest.raises(ValueError, match="intermediate"):
        attach_and_train(
            SegmentedBackbone([8, 8], [1, 2], classes=10),
            [ExitSpec(position=2, layers=1, width=0)],
            TrainRecipe(epochs=1),
            torch.zeros(8, 3, 32, 32),
            torch.zeros(4, 3, 32, 32),
            torch.zeros(4, dtype=torch.int64),
        )


def test_recipe_validation():
    with pytest.raises(ValueError):
        TrainRecipe(optimizer="sgd")
    with pytest.raises(ValueError):
        TrainRecipe(augmentation="cutmix")
    with pytest.raises(ValueError):
        TrainRecipe(epochs=0)


def test_backbone_weights_unchanged_by_exit_training():
    torch.manual_seed(5)
    data = make_dataset(seed=5, train=128, val=48, eval_count=16)
    backbone = SegmentedBackbone([8, 12, 16], [1, 2, 2], classes=10)
    before = state_digest(backbone)
    heads, log = attach_and_train(
        backbone,
        [ExitSpec(position=1, layers=1, width=0), ExitSpec(position=2, layers=3, width=500)],
        TrainRecipe(epochs=1, batch_size=32),
        data.train_x,
        data.val_x,
        data.val_y,
        seed=5,
    )
    assert state_digest(backbone) == before
    assert log["backbone_digest"] == before
    assert len(heads) == 2
    assert {entry["position"] for entry in log["exits"]} == {1, 2}


def test_hflip_augmentation_path():
    data = make_dataset(seed=6, train=96, val=32, eval_count=16)
    backbone = SegmentedBackbone([8, 12], [1, 2], classes=10)
    heads, log = attach_and_train(
        backbone,
        [ExitSpec(position=1, layers=1, width=0)],
        TrainRecipe(epochs=1, batch_size=32, augmentation="hflip"),
        data.train_x,
        data.val_x,
        data.val_y,
        seed=6,
    )
    assert len(log["exits"]) == 1


def test_experiment_file_round_trip(tmp_path):
    path = tmp_path / "experiment.json"
    result = subprocess.run(
        [sys.executable, "-m", "dyce_exporter.cli", "init", "--out", path],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr
    loaded = Experiment.load(path)
    assert loaded == Experiment.from_dict(DESK_EXPERIMENT)
    specs = loaded.exit_specs()
    assert len(specs) == 25
    assert {s.position for s in specs} == {1, 2, 3, 4, 5}


def test_reduced_run_outputs(reduced_run):
    trace_dir, log = reduced_run
    assert (trace_dir / "manifest.json").is_file()
    assert (trace_dir / "trace.csv").is_file()
    assert (trace_dir / "training_log.json").is_file()
    assert len(log["exits"]) == 4
    assert all(0.0 <= entry["val_accuracy"] <= 1.0 for entry in log["exits"])

    manifest = json.loads((trace_dir / "manifest.json").read_text())
    assert manifest["version"] == 1
    assert manifest["N"] == 6
    assert manifest["K"] == [0, 2, 0, 2, 0, 1]
    assert abs(sum(manifest["S"]) - 1.0) < 1e-6
    assert all(row[0] == 0.0 for row in manifest["delta"])
    assert "analytic MACs" in manifest["name"]


def test_reduced_trace_validates_through_search_cli(reduced_run):
    trace_dir, _ = reduced_run
    result = subprocess.run(
        [sys.executable, "-m", "dyce", "validate", "--trace", str(trace_dir)],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr
    assert result.stdout.startswith("OK:")


def test_reduced_trace_confidences_are_nine_digit_decimals(reduced_run):
    trace_dir, _ = reduced_run
    with open(trace_dir / "trace.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            text = row["confidence"]
            value = float(text)
            assert 0.0 < value <= 1.0
            digits = text.replace("-", "").replace(".", "").replace("e", "").lstrip("0")
            assert len(digits) <= 10  # 9 significant digits plus exponent slack
