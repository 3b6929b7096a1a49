"""Acceptance for the exporter: the desk-scale trace must be valid under the
search tooling and compressible by the sweep.  Run with ``pytest -v -s``.
"""

import csv
import json
import subprocess
import sys


def search_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "dyce", *[str(a) for a in args]],
        capture_output=True,
        text=True,
    )


def test_s1_exported_trace_is_valid(desk_run):
    trace_dir, log = desk_run
    result = search_cli("validate", "--trace", trace_dir)
    assert result.returncode == 0, result.stderr
    assert result.stdout.startswith("OK:")

    manifest = json.loads((trace_dir / "manifest.json").read_text())
    flags = []
    with open(trace_dir / "trace.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            if int(row["position"]) == manifest["N"] and int(row["exit_index"]) == 1:
                flags.append(int(row["correct"]))
    assert len(flags) == manifest["M"]
    assert manifest["a_ori"] == sum(flags) / len(flags)

    chance = 1.0 / 10
    weakest = min(log["exits"], key=lambda e: e["val_accuracy"])
    assert weakest["val_accuracy"] > 2 * chance, weakest
    print(
        f"[PASS] exported desk trace validates cleanly "
        f"(M={manifest['M']}, a_ori={manifest['a_ori']:.4f}, "
        f"backbone val accuracy {log['backbone_val_accuracy']:.4f}, "
        f"weakest exit {weakest['variant']}@{weakest['position']} "
        f"at {weakest['val_accuracy']:.3f})"
    )


def test_s2_desk_scale_compression(desk_run, tmp_path):
    trace_dir, _ = desk_run
    manifest = json.loads((trace_dir / "manifest.json").read_text())
    a_ori = manifest["a_ori"]

    sweep_dir = tmp_path / "sweep"
    result = search_cli(
        "sweep", "--trace", trace_dir, "--start", "0", "--end", "1", "--step", "0.02",
        "--out", sweep_dir,
    )
    assert result.returncode == 0, result.stderr

    with open(sweep_dir / "frontier.csv", newline="") as fh:
        entries = [
            {"lambda": float(r["lambda"]), "A": float(r["A"]), "C": float(r["C"])}
            for r in csv.DictReader(fh)
        ]
    qualifying = [
        e for e in entries
        if e["C"] <= 0.9 and (a_ori - e["A"] * a_ori) * 100.0 <= 1.0
    ]

    with open(sweep_dir / "frontier_pareto.csv", newline="") as fh:
        pareto = [
            {"lambda": float(r["lambda"]), "A": float(r["A"]), "C": float(r["C"])}
            for r in csv.DictReader(fh)
        ]
    print("  accuracy/complexity curve (non-dominated points):")
    for e in pareto:
        drop_pp = (a_ori - e["A"] * a_ori) * 100.0
        print(
            f"    lambda={e['lambda']:<5g} C={e['C']:.4f} A={e['A']:.4f} "
            f"accuracy drop {drop_pp:+.2f}pp"
        )
    assert qualifying, "no configuration reached C <= 0.9 within a 1pp accuracy drop"
    best = min(qualifying, key=lambda e: e["C"])
    print(
        f"[PASS] desk-scale compression: {len(qualifying)} configurations with "
        f"C <= 0.9 and drop <= 1pp; best C = {best['C']:.4f} "
        f"({(1 - best['C']) * 100:.1f}% compute reduction)"
    )
