"""Train, extract, verify and evaluate every bundled dataset.

Writes per-dataset artifacts plus consolidated metrics.csv, rule_counts.csv
and report.md under --out (default: reproduction/). Extra arguments are
passed through to ``nn2rules reproduce``.

    python scripts/run_reproduction.py --out runs/default
    python scripts/run_reproduction.py --datasets adult,contraception --seed 7
"""
import sys

from nn2rules.cli import main

if __name__ == "__main__":
    sys.exit(main(["reproduce", *sys.argv[1:]]))
