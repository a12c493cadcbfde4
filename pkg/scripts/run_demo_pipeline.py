#!/usr/bin/env python3
"""End-to-end demo: synthesize a dataset, rightsize it, learn the feature
hierarchy, train the cold-start provisioner, predict, and evaluate.

Everything goes through the CLI so the run doubles as a smoke test of the
command surface.  Artifacts land in the output directory (default
./demo_out).
"""
import argparse
import subprocess
import sys


def sh(*args: str) -> None:
    cmd = [sys.executable, "-m", "skurec.cli", *args]
    print("+", " ".join(cmd))
    subprocess.run(cmd, check=True)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", default="demo_out")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--customers", type=int, default=30)
    ap.add_argument(
        "--max-val-error", type=float, default=2.0,
        help="validation gate for train (log2 MAE); the demo default is "
        "relaxed so small --customers runs still pass",
    )
    args = ap.parse_args()
    d = args.out_dir

    sh(
        "gen-synthetic",
        "--out-dir", d,
        "--seed", str(args.seed),
        "--customers", str(args.customers),
        "--upscale",
    )
    sh(
        "rightsize",
        "--telemetry", f"{d}/telemetry.csv",
        "--profiles", f"{d}/profiles.csv",
        "--catalog", f"{d}/catalog.csv",
        "--out", f"{d}/labels.csv",
    )
    sh("learn-hierarchy", "--profiles", f"{d}/profiles.csv", "--out", f"{d}/hierarchy.json")
    sh(
        "train",
        "--profiles", f"{d}/profiles.csv",
        "--labels", f"{d}/labels.csv",
        "--hierarchy", f"{d}/hierarchy.json",
        "--seed", str(args.seed),
        "--out", f"{d}/store.json",
        "--rows-out", f"{d}/prediction_rows.csv",
        "--max-val-error", str(args.max_val_error),
    )
    sh(
        "predict",
        "--store", f"{d}/store.json",
        "--profiles", f"{d}/profiles.csv",
        "--out", f"{d}/predictions.csv",
    )
    sh(
        "evaluate",
        "--telemetry", f"{d}/telemetry.csv",
        "--profiles", f"{d}/profiles.csv",
        "--predictions", f"{d}/predictions.csv",
        "--catalog", f"{d}/catalog.csv",
        "--out", f"{d}/curves.csv",
    )
    sh("simulate", "--iterations", "50", "--seed", str(args.seed), "--out", f"{d}/sim_metrics.csv")
    print(f"done; artifacts in {d}/")


if __name__ == "__main__":
    main()
