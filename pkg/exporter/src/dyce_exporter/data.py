"""Deterministic synthetic image dataset for desk-scale experiments.

Ten classes of smooth low-frequency color templates with per-sample
brightness, contrast and pixel noise.  A configurable fraction of samples
blends in a second class's template with the label staying on the heavier
side, so part of the data is genuinely ambiguous: shallow features separate
the clean samples while the blended ones need depth (and some defeat even
the full model), which is exactly the regime an early-exit system exploits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch


@dataclass(frozen=True)
class SyntheticSplits:
    train_x: torch.Tensor
    train_y: torch.Tensor
    val_x: torch.Tensor
    val_y: torch.Tensor
    eval_x: torch.Tensor
    eval_y: torch.Tensor
    classes: int


def _class_templates(rng: np.random.Generator, classes: int, size: int) -> np.ndarray:
    coarse = rng.normal(0.0, 1.0, size=(classes, 3, 4, 4))
    templates = np.kron(coarse, np.ones((1, 1, size // 4, size // 4)))
    # light smoothing so class structure is not axis-aligned blocks only
    rolled = 0.5 * templates + 0.25 * np.roll(templates, 1, axis=2) + 0.25 * np.roll(
        templates, 1, axis=3
    )
    rolled = rolled / np.abs(rolled).max(axis=(1, 2, 3), keepdims=True)
    # distinct mean color per class so even pooled shallow features carry signal
    rolled += rng.normal(0.0, 0.55, size=(classes, 3, 1, 1))
    return rolled


def _sample_split(rng, templates, count, noise, hard_fraction):
    classes = templates.shape[0]
    size = templates.shape[-1]
    labels = rng.integers(0, classes, size=count)
    weights = np.ones((count, 1, 1, 1))
    distractors = rng.integers(0, classes, size=count)
    hard = rng.random(count) < hard_fraction
    weights[hard, 0, 0, 0] = rng.uniform(0.52, 0.8, size=int(hard.sum()))
    images = templates[labels] * weights + templates[distractors] * (1.0 - weights)
    brightness = rng.uniform(0.7, 1.3, size=(count, 1, 1, 1))
    contrast = rng.uniform(0.6, 1.4, size=(count, 1, 1, 1))
    images = images * contrast * brightness
    images += rng.normal(0.0, noise, size=(count, 3, size, size))
    return (
        torch.from_numpy(images.astype(np.float32)),
        torch.from_numpy(labels.astype(np.int64)),
    )


def make_dataset(
    seed: int,
    train: int,
    val: int,
    eval_count: int,
    classes: int = 10,
    image_size: int = 32,
    noise: float = 0.35,
    hard_fraction: float = 0.25,
) -> SyntheticSplits:
    rng = np.random.default_rng(seed)
    templates = _class_templates(rng, classes, image_size)
    train_x, train_y = _sample_split(rng, templates, train, noise, hard_fraction)
    val_x, val_y = _sample_split(rng, templates, val, noise, hard_fraction)
    eval_x, eval_y = _sample_split(rng, templates, eval_count, noise, hard_fraction)
    return SyntheticSplits(train_x, train_y, val_x, val_y, eval_x, eval_y, classes)
