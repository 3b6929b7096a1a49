"""Declarative experiment description and the end-to-end pipeline.

An experiment file pins everything the run needs: dataset sizes and noise,
backbone shape, exit variants per position, and the training recipe
(epochs, batch size and augmentation are explicit inputs, not defaults baked
into code).  Running one produces a trace directory plus a JSON log.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import torch

from .backbone import SegmentedBackbone, pretrain_backbone, state_digest
from .data import make_dataset
from .exits import DEFAULT_VARIANTS, ExitSpec
from .export import export_trace
from .training import TrainRecipe, attach_and_train

DESK_EXPERIMENT = {
    "name": "tinycnn6-synth10",
    "seed": 7,
    "dataset": {
        "train": 3000,
        "val": 600,
        "eval": 1200,
        "classes": 10,
        "image_size": 32,
        "noise": 0.6,
        "hard_fraction": 0.25,
    },
    "backbone": {
        "channels": [32, 48, 64, 96, 128, 160],
        "strides": [1, 2, 1, 2, 1, 2],
        "pretrain_epochs": 4,
        "pretrain_lr": 1e-3,
    },
    "exits": {
        "positions": [1, 2, 3, 4, 5],
        "variants": list(list(v) for v in DEFAULT_VARIANTS),
    },
    "recipe": {
        "optimizer": "adam",
        "learning_rate": 3e-4,
        "epochs": 3,
        "batch_size": 128,
        "augmentation": "none",
        "freeze_backbone": True,
    },
}


@dataclass(frozen=True)
class Experiment:
    name: str
    seed: int
    dataset: dict
    backbone: dict
    exits: dict
    recipe: TrainRecipe

    @classmethod
    def from_dict(cls, data: dict) -> "Experiment":
        return cls(
            name=data["name"],
            seed=int(data["seed"]),
            dataset=dict(data["dataset"]),
            backbone=dict(data["backbone"]),
            exits=dict(data["exits"]),
            recipe=TrainRecipe(**data["recipe"]),
        )

    @classmethod
    def load(cls, path: str | Path) -> "Experiment":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def exit_specs(self) -> list[ExitSpec]:
        specs = []
        for position in self.exits["positions"]:
            for layers, width in self.exits["variants"]:
                specs.append(ExitSpec(position=position, layers=layers, width=width))
        return specs


def run_experiment(experiment: Experiment, out_dir: str | Path) -> dict:
    """Pretrain, freeze, distill exits, export the trace.  Returns the log."""
    torch.manual_seed(experiment.seed)
    data = make_dataset(
        seed=experiment.seed,
        train=experiment.dataset["train"],
        val=experiment.dataset["val"],
        eval_count=experiment.dataset["eval"],
        classes=experiment.dataset["classes"],
        image_size=experiment.dataset["image_size"],
        noise=experiment.dataset["noise"],
        hard_fraction=experiment.dataset.get("hard_fraction", 0.25),
    )
    backbone = SegmentedBackbone(
        channels=experiment.backbone["channels"],
        strides=experiment.backbone["strides"],
        classes=data.classes,
    )
    pretrain_log = pretrain_backbone(
        backbone,
        data.train_x,
        data.train_y,
        data.val_x,
        data.val_y,
        epochs=experiment.backbone["pretrain_epochs"],
        batch_size=experiment.recipe.batch_size,
        lr=experiment.backbone["pretrain_lr"],
        seed=experiment.seed,
        augmentation=experiment.recipe.augmentation,
    )
    frozen_digest = state_digest(backbone)

    heads, train_log = attach_and_train(
        backbone,
        experiment.exit_specs(),
        experiment.recipe,
        data.train_x,
        data.val_x,
        data.val_y,
        seed=experiment.seed,
    )
    assert state_digest(backbone) == frozen_digest

    manifest_path = export_trace(
        backbone,
        heads,
        data.eval_x,
        data.eval_y,
        out_dir,
        name=experiment.name,
        image_size=experiment.dataset["image_size"],
    )
    log = {
        "experiment": experiment.name,
        "backbone_val_accuracy": pretrain_log["val_accuracy"],
        "backbone_digest": frozen_digest,
        "exits": train_log["exits"],
        "manifest": str(manifest_path),
    }
    log_path = Path(out_dir) / "training_log.json"
    log_path.write_text(json.dumps(log, indent=2, sort_keys=True) + "\n")
    return log
