"""Command line for the exporter: run an experiment file end to end."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiment import DESK_EXPERIMENT, Experiment, run_experiment


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="dyce-export",
        description="Train exit heads on a frozen backbone and export a trace directory.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment end to end")
    p.add_argument(
        "--experiment",
        default=None,
        help="experiment JSON; omit for the built-in desk-scale experiment",
    )
    p.add_argument("--out", required=True, help="output trace directory")

    p = sub.add_parser("init", help="write the built-in experiment file for editing")
    p.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    if args.command == "init":
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(DESK_EXPERIMENT, indent=2) + "\n")
        print(f"wrote {path}")
        return 0

    if args.experiment is None:
        experiment = Experiment.from_dict(DESK_EXPERIMENT)
    else:
        experiment = Experiment.load(args.experiment)
    log = run_experiment(experiment, args.out)
    print(f"backbone validation accuracy: {log['backbone_val_accuracy']:.4f}")
    for entry in log["exits"]:
        print(
            f"  exit position {entry['position']} {entry['variant']}: "
            f"val accuracy {entry['val_accuracy']:.4f}"
        )
    print(f"trace written to {log['manifest']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
