"""Segmented convolutional backbone with a pooled linear head.

The backbone is a plain stack of conv blocks; each block is one segment and
its output is a tap point for exits.  The head (global average pooling plus
one linear layer) plays the role of the model's original final exit.
"""

from __future__ import annotations

import hashlib

import torch
import torch.nn as nn


class SegmentedBackbone(nn.Module):
    def __init__(self, channels: list[int], strides: list[int], classes: int, in_channels: int = 3):
        super().__init__()
        if len(channels) != len(strides):
            raise ValueError("channels and strides must align")
        segments = []
        previous = in_channels
        for width, stride in zip(channels, strides):
            segments.append(
                nn.Sequential(
                    nn.Conv2d(previous, width, kernel_size=3, stride=stride, padding=1, bias=False),
                    nn.BatchNorm2d(width),
                    nn.ReLU(inplace=True),
                )
            )
            previous = width
        self.segments = nn.ModuleList(segments)
        self.head = nn.Linear(previous, classes)
        self.channels = list(channels)
        self.classes = classes

    @property
    def segment_count(self) -> int:
        return len(self.segments)

    def forward_segments(self, x: torch.Tensor) -> list[torch.Tensor]:
        """Outputs of every segment, in order."""
        taps = []
        out = x
        for segment in self.segments:
            out = segment(out)
            taps.append(out)
        return taps

    def head_logits(self, last_tap: torch.Tensor) -> torch.Tensor:
        pooled = last_tap.mean(dim=(2, 3))
        return self.head(pooled)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head_logits(self.forward_segments(x)[-1])


def state_digest(module: nn.Module) -> str:
    """Digest over all parameters and buffers; detects any weight change."""
    h = hashlib.sha256()
    for name, tensor in sorted(module.state_dict().items()):
        h.update(name.encode())
        h.update(tensor.detach().cpu().numpy().tobytes())
    return h.hexdigest()


def pretrain_backbone(
    backbone: SegmentedBackbone,
    train_x: torch.Tensor,
    train_y: torch.Tensor,
    val_x: torch.Tensor,
    val_y: torch.Tensor,
    epochs: int,
    batch_size: int,
    lr: float,
    seed: int,
    augmentation: str = "none",
) -> dict:
    """Supervised pretraining of the whole backbone; returns a log with the
    final validation accuracy."""
    torch.manual_seed(seed)
    optimizer = torch.optim.Adam(backbone.parameters(), lr=lr)
    loss_fn = nn.CrossEntropyLoss()
    generator = torch.Generator().manual_seed(seed)
    log = {"epochs": []}
    backbone.train()
    for epoch in range(epochs):
        order = torch.randperm(train_x.shape[0], generator=generator)
        total = 0.0
        for start in range(0, len(order), batch_size):
            batch = order[start:start + batch_size]
            x = train_x[batch]
            if augmentation == "hflip":
                flip = torch.rand(x.shape[0], generator=generator) < 0.5
                x = torch.where(flip[:, None, None, None], x.flip(-1), x)
            optimizer.zero_grad()
            loss = loss_fn(backbone(x), train_y[batch])
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * len(batch)
        log["epochs"].append({"epoch": epoch, "loss": total / len(order)})
    backbone.eval()
    with torch.no_grad():
        predicted = backbone(val_x).argmax(dim=1)
        log["val_accuracy"] = float((predicted == val_y).float().mean())
    return log
