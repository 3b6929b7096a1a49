"""Analytic multiply-accumulate counts for the backbone and exit heads.

Convention: convolutions and linear layers count ``output_elements *
kernel_inputs`` multiplies; normalization, activations and pooling count
zero.  All exported costs are normalized by the total backbone MACs so the
segment shares sum to one.
"""

from __future__ import annotations

import torch
import torch.nn as nn


def _conv_macs(conv: nn.Conv2d, out_h: int, out_w: int) -> int:
    k_h, k_w = conv.kernel_size
    return out_h * out_w * conv.out_channels * (conv.in_channels // conv.groups) * k_h * k_w


def module_macs(module: nn.Module, example: torch.Tensor) -> int:
    """MACs of one forward pass of ``module`` on a single example."""
    totals = {"macs": 0}
    hooks = []

    def on_conv(layer, inputs, output):
        totals["macs"] += _conv_macs(layer, output.shape[-2], output.shape[-1])

    def on_linear(layer, inputs, output):
        totals["macs"] += layer.in_features * layer.out_features

    for layer in module.modules():
        if isinstance(layer, nn.Conv2d):
            hooks.append(layer.register_forward_hook(on_conv))
        elif isinstance(layer, nn.Linear):
            hooks.append(layer.register_forward_hook(on_linear))
    try:
        with torch.no_grad():
            module(example)
    finally:
        for hook in hooks:
            hook.remove()
    return totals["macs"]


def backbone_cost_model(backbone, image_size: int, in_channels: int = 3):
    """Per-segment MACs, the head's MACs and per-segment output channels.

    Returns ``(segment_macs, head_macs, total_backbone_macs)``.
    """
    example = torch.zeros(1, in_channels, image_size, image_size)
    segment_macs = []
    out = example
    for segment in backbone.segments:
        macs = module_macs(segment, out)
        with torch.no_grad():
            out = segment(out)
        segment_macs.append(macs)
    head_macs = backbone.head.in_features * backbone.head.out_features
    return segment_macs, head_macs, sum(segment_macs)
