"""Exit head definitions: global average pooling followed by a small MLP.

Five variants are used by default, mirroring a sweep from a bare linear
probe up to a 5-layer, 1000-wide MLP.  Every exit emits logits over the full
class set.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch.nn as nn

ALLOWED_LAYERS = (1, 3, 5)
ALLOWED_WIDTHS = (500, 1000)

DEFAULT_VARIANTS = ((1, 0), (3, 500), (3, 1000), (5, 500), (5, 1000))


class ShapeMismatch(RuntimeError):
    """Aggregated feature width does not match the exit's input layer."""


@dataclass(frozen=True)
class ExitSpec:
    """One exit head: ``layers`` total linear layers (1 means a bare probe,
    widths then ignored) on the pooled feature vector at 1-based ``position``."""

    position: int
    layers: int
    width: int

    def __post_init__(self):
        if self.layers not in ALLOWED_LAYERS:
            raise ValueError(f"layers must be one of {ALLOWED_LAYERS}")
        if self.layers > 1 and self.width not in ALLOWED_WIDTHS:
            raise ValueError(f"width must be one of {ALLOWED_WIDTHS}")
        if self.position < 1:
            raise ValueError("position is 1-based")

    @property
    def label(self) -> str:
        if self.layers == 1:
            return "mlp-1"
        return f"mlp-{self.layers}x{self.width}"


class PooledMlpExit(nn.Module):
    """MLP over the globally average-pooled feature map (aggregated to 1x1)."""

    def __init__(self, spec: ExitSpec, in_channels: int, classes: int):
        super().__init__()
        self.spec = spec
        self.in_channels = in_channels
        if spec.layers == 1:
            layers = [nn.Linear(in_channels, classes)]
        else:
            layers = [nn.Linear(in_channels, spec.width), nn.ReLU(inplace=True)]
            for _ in range(spec.layers - 2):
                layers.extend([nn.Linear(spec.width, spec.width), nn.ReLU(inplace=True)])
            layers.append(nn.Linear(spec.width, classes))
        self.mlp = nn.Sequential(*layers)

    def forward(self, pooled):
        if pooled.shape[-1] != self.in_channels:
            raise ShapeMismatch(
                f"exit at position {self.spec.position} expects {self.in_channels} "
                f"pooled features, got {pooled.shape[-1]}"
            )
        return self.mlp(pooled)
