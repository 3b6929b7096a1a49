"""Trace export: run the evaluation split through the frozen backbone and
every trained exit, then write the interchange files.

The output is the trace directory format consumed by the search tooling:
``manifest.json`` plus ``trace.csv`` with confidences limited to 9
significant decimal digits.  This module implements the format directly and
is the only bridge between the training stack and the search stack.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import torch
import torch.nn.functional as F

from .backbone import SegmentedBackbone
from .exits import ExitSpec, PooledMlpExit
from .macs import backbone_cost_model
from .training import pooled_features

CONFIDENCE_SIG_DIGITS = 9


def round_confidence(value: float) -> float:
    return float(f"{value:.{CONFIDENCE_SIG_DIGITS}g}")


def format_number(value: float) -> str:
    return repr(float(value))


class ValidationFailure(RuntimeError):
    """The produced records would violate the trace format's invariants."""


def collect_records(
    backbone: SegmentedBackbone,
    heads: dict[ExitSpec, PooledMlpExit],
    images: torch.Tensor,
    labels: torch.Tensor,
):
    """Confidence/correctness arrays per (position, candidate) on a split.

    Candidate order at a position follows the order in which the exit heads
    were declared; the frozen head is the single candidate at the final
    position.
    Returns ``(per_position, head_confidence, head_correct)`` where
    ``per_position[pos0]`` is a list of ``(confidence, correct)`` pairs.
    """
    backbone.eval()
    features, head_logits = pooled_features(backbone, images)
    per_position: list[list[tuple[list[float], list[int]]]] = [
        [] for _ in range(backbone.segment_count)
    ]
    with torch.no_grad():
        for spec, head in heads.items():
            probs = F.softmax(head(features[spec.position - 1]), dim=1)
            confidence = [round_confidence(v) for v in probs.max(dim=1).values.tolist()]
            correct = (probs.argmax(dim=1) == labels).long().tolist()
            per_position[spec.position - 1].append((confidence, correct))
        head_probs = F.softmax(head_logits, dim=1)
        head_confidence = [
            round_confidence(v) for v in head_probs.max(dim=1).values.tolist()
        ]
        head_correct = (head_probs.argmax(dim=1) == labels).long().tolist()
    per_position[backbone.segment_count - 1].append((head_confidence, head_correct))
    return per_position


def export_trace(
    backbone: SegmentedBackbone,
    heads: dict[ExitSpec, PooledMlpExit],
    images: torch.Tensor,
    labels: torch.Tensor,
    out_dir: str | Path,
    name: str,
    image_size: int,
) -> Path:
    """Write ``manifest.json`` and ``trace.csv`` for the evaluation split."""
    per_position = collect_records(backbone, heads, images, labels)
    m = int(images.shape[0])
    n = backbone.segment_count
    candidates = [len(per_position[pos0]) for pos0 in range(n)]

    segment_macs, head_macs, total = backbone_cost_model(backbone, image_size)
    shares = [macs / total for macs in segment_macs]
    example = torch.zeros(1, 3, image_size, image_size)
    delta: list[list[float]] = []
    by_position: dict[int, list[ExitSpec]] = {pos0: [] for pos0 in range(n)}
    for spec in heads:
        by_position[spec.position - 1].append(spec)
    from .macs import module_macs

    with torch.no_grad():
        taps = backbone.forward_segments(example)
    for pos0 in range(n):
        row = [0.0]
        pooled = taps[pos0].mean(dim=(2, 3))
        for spec in by_position[pos0]:
            row.append(module_macs(heads[spec].mlp, pooled) / total)
        if pos0 == n - 1:
            row.append(head_macs / total)
        delta.append(row)

    head_confidence, head_correct = per_position[n - 1][-1]
    a_ori = sum(head_correct) / m
    if not 0.0 < a_ori <= 1.0:
        raise ValidationFailure(
            f"frozen head accuracy {a_ori} cannot anchor the trace; train longer"
        )
    for pos0 in range(n):
        for confidence, correct in per_position[pos0]:
            if len(confidence) != m or len(correct) != m:
                raise ValidationFailure(f"missing records at position {pos0 + 1}")
            for value in confidence:
                if not 0.0 <= value <= 1.0:
                    raise ValidationFailure(
                        f"confidence {value} out of range at position {pos0 + 1}"
                    )

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "position", "exit_index", "confidence", "correct"])
        for pos0 in range(n):
            for k0, (confidence, correct) in enumerate(per_position[pos0]):
                for sid in range(m):
                    writer.writerow(
                        [
                            sid,
                            pos0 + 1,
                            k0 + 1,
                            format_number(confidence[sid]),
                            correct[sid],
                        ]
                    )
    manifest = {
        "version": 1,
        "name": f"{name} (analytic MACs: conv+linear multiplies only)",
        "M": m,
        "N": n,
        "K": candidates,
        "S": shares,
        "delta": delta,
        "a_ori": a_ori,
        "trace": "trace.csv",
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path
