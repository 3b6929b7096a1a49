"""Distillation training of exit heads against a frozen backbone.

The backbone never enters the optimizer: its tap features are computed once
under ``no_grad`` and cached, which is equivalent to freezing and keeps the
weights byte-identical by construction (asserted anyway).  Every exit is
trained on the soft cross-entropy between its own prediction and the frozen
head's output distribution, so no labels are needed for this stage.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .backbone import SegmentedBackbone, state_digest
from .exits import ExitSpec, PooledMlpExit

AUGMENTATIONS = ("none", "hflip")


class FrozenBackboneViolated(RuntimeError):
    """The recipe asked for backbone updates, or weights changed during training."""


@dataclass(frozen=True)
class TrainRecipe:
    """How to train the exits.  The backbone must stay frozen."""

    optimizer: str = "adam"
    learning_rate: float = 3e-4
    epochs: int = 3
    batch_size: int = 128
    augmentation: str = "none"
    freeze_backbone: bool = True

    def __post_init__(self):
        if self.optimizer != "adam":
            raise ValueError("only adam is supported")
        if self.augmentation not in AUGMENTATIONS:
            raise ValueError(f"augmentation must be one of {AUGMENTATIONS}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")


def soft_cross_entropy(logits: torch.Tensor, teacher_probs: torch.Tensor) -> torch.Tensor:
    """Cross-entropy of predicted log-probabilities under the teacher's
    distribution, averaged over the batch."""
    return -(teacher_probs * F.log_softmax(logits, dim=1)).sum(dim=1).mean()


@torch.no_grad()
def pooled_features(backbone: SegmentedBackbone, images: torch.Tensor, batch_size: int = 256):
    """Average-pooled tap features per segment plus the frozen head's logits."""
    backbone.eval()
    chunks = [[] for _ in range(backbone.segment_count)]
    head_logits = []
    for start in range(0, images.shape[0], batch_size):
        taps = backbone.forward_segments(images[start:start + batch_size])
        for pos0, tap in enumerate(taps):
            chunks[pos0].append(tap.mean(dim=(2, 3)))
        head_logits.append(backbone.head_logits(taps[-1]))
    return [torch.cat(c) for c in chunks], torch.cat(head_logits)


def attach_and_train(
    backbone: SegmentedBackbone,
    specs: list[ExitSpec],
    recipe: TrainRecipe,
    train_images: torch.Tensor,
    val_images: torch.Tensor,
    val_labels: torch.Tensor,
    seed: int = 0,
) -> tuple[dict[ExitSpec, PooledMlpExit], dict]:
    """Train one exit head per spec, each independently, by distillation.

    Returns the trained heads and a log with per-exit validation accuracy.
    Raises ``FrozenBackboneViolated`` if the recipe asks to unfreeze or the
    backbone weights change.
    """
    if not recipe.freeze_backbone:
        raise FrozenBackboneViolated("the backbone must stay frozen while exits train")
    for spec in specs:
        if not 1 <= spec.position < backbone.segment_count:
            raise ValueError(
                f"exit position {spec.position} must be an intermediate segment "
                f"(the final position is the frozen head)"
            )

    digest_before = state_digest(backbone)
    backbone.eval()
    for parameter in backbone.parameters():
        parameter.requires_grad_(False)

    torch.manual_seed(seed)
    generator = torch.Generator().manual_seed(seed)

    variants = [train_images]
    if recipe.augmentation == "hflip":
        variants.append(train_images.flip(-1))
    cached = [pooled_features(backbone, images) for images in variants]
    val_features, _ = pooled_features(backbone, val_images)

    heads: dict[ExitSpec, PooledMlpExit] = {}
    log = {"exits": []}
    count = train_images.shape[0]
    for spec in specs:
        pos0 = spec.position - 1
        head = PooledMlpExit(spec, backbone.channels[pos0], backbone.classes)
        optimizer = torch.optim.Adam(head.parameters(), lr=recipe.learning_rate)
        head.train()
        for epoch in range(recipe.epochs):
            order = torch.randperm(count, generator=generator)
            for start in range(0, count, recipe.batch_size):
                batch = order[start:start + recipe.batch_size]
                if len(variants) > 1:
                    pick = int(
                        torch.randint(len(variants), (1,), generator=generator)
                    )
                else:
                    pick = 0
                features, teacher_logits = cached[pick]
                optimizer.zero_grad()
                loss = soft_cross_entropy(
                    head(features[pos0][batch]),
                    F.softmax(teacher_logits[batch], dim=1),
                )
                loss.backward()
                optimizer.step()
        head.eval()
        with torch.no_grad():
            predicted = head(val_features[pos0]).argmax(dim=1)
            accuracy = float((predicted == val_labels).float().mean())
        log["exits"].append(
            {"position": spec.position, "variant": spec.label, "val_accuracy": accuracy}
        )
        heads[spec] = head

    if state_digest(backbone) != digest_before:
        raise FrozenBackboneViolated("backbone weights changed during exit training")
    log["backbone_digest"] = digest_before
    return heads, log
