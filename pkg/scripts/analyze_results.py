#!/usr/bin/env python3
"""
Script to analyze results written by the awn commands.
"""

import sys
import argparse
import pandas as pd
from pathlib import Path

# Add project root to path
sys.path.append(str(Path(__file__).parent.parent))

from config.settings import RESULTS_DIR, TRAIN_LOG_FILE
from src.analysis.evaluation import TradeoffCurve, curve_summary


def main(argv=None):
    parser = argparse.ArgumentParser(description="Analyze training logs and width-accuracy curves")
    parser.add_argument("--analysis-type", "-t",
                        choices=["curves", "training"],
                        default="curves",
                        help="Type of analysis to run")
    parser.add_argument("--results-dir", "-r",
                        default=str(RESULTS_DIR),
                        help="Directory searched recursively for result files")
    parser.add_argument("--output-file", "-o",
                        help="Output CSV for the summary table")

    args = parser.parse_args(argv)

    print(f"🔍 Running {args.analysis_type} analysis")
    print("-" * 40)

    try:
        if args.analysis_type == "curves":
            summary = summarize_curves(Path(args.results_dir))
        else:
            summary = summarize_training(Path(args.results_dir))
    except (OSError, ValueError) as e:
        print(f"❌ Error running analysis: {e}")
        return 1

    if summary.empty:
        print(f"❌ No result files found under {args.results_dir}")
        return 1

    print(summary.to_string(index=False))
    if args.output_file:
        summary.to_csv(args.output_file, index=False)
        print(f"\n💾 Summary saved to: {args.output_file}")
    return 0


def summarize_curves(results_dir: Path) -> pd.DataFrame:
    """One row per curve CSV: AUC, max step drop and endpoint accuracies."""
    rows = []
    for path in sorted(results_dir.rglob("curve*.csv")):
        curve = TradeoffCurve.from_csv(path)
        rows.append({"run": str(path.relative_to(results_dir)), "points": len(curve.alphas),
                     **curve_summary(curve)})
    df = pd.DataFrame(rows)
    if not df.empty:
        df = df.sort_values("auc", ascending=False)
    return df


def summarize_training(results_dir: Path) -> pd.DataFrame:
    """Final-epoch loss per width for every train log."""
    frames = []
    for path in sorted(results_dir.rglob(TRAIN_LOG_FILE)):
        df = pd.read_csv(path, dtype={"width": str})
        final = df[df["epoch"] == df["epoch"].max()].copy()
        final.insert(0, "run", str(path.parent.relative_to(results_dir)))
        frames.append(final)
    if not frames:
        return pd.DataFrame()
    df = pd.concat(frames, ignore_index=True)
    return df.groupby(["run", "width"], as_index=False).agg(epoch=("epoch", "max"), loss=("loss", "mean"))


if __name__ == "__main__":
    sys.exit(main())
