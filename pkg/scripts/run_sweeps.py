"""Trust-factor, interval-length and delay sweeps on the 4-node fixture.

Usage:
    python3 scripts/run_sweeps.py [out_dir] [--repeats 30]

Writes one sub-directory per sweep (sweep_runs.csv, sweep_summary.csv) and
prints the summary tables. The tau-d and delay sweeps use exact
enumeration, so they need no repeats.
"""

import argparse
from pathlib import Path

from mtrisk import AssessmentConfig, bundled_case_path, load_case
from mtrisk.sweep import run_sweep, summarize, write_sweep

INITIAL = [5]
SWEEPS = [
    ("trust-lambda", [0.01, 0.1, 1.0, 10.0], "search"),
    ("tau-d", [5, 10, 15, 20], "enumerate"),
    ("delay", [0, 5, 10, 15, 20, 30], "enumerate"),
]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out", nargs="?", default="results/sweeps")
    ap.add_argument("--repeats", type=int, default=30)
    args = ap.parse_args()

    case = load_case(bundled_case_path("four_node"))
    config = AssessmentConfig()
    for param, values, mode in SWEEPS:
        rows = run_sweep(case, config, param, values, args.repeats, INITIAL, mode)
        write_sweep(Path(args.out) / param, rows)
        print(f"\n{param} ({mode})")
        if mode == "enumerate":
            for s in summarize(rows):
                print(f"{s['value']:>8g} {s['risk_mean']:>10.5f}")
            continue
        print(f"{'value':>8} {'risk':>10} {'attempts':>9} {'phi':>10}")
        for s in summarize(rows):
            print(f"{s['value']:>8g} {s['risk_mean']:>10.5f} {s['attempts_mean']:>9.1f} {s['phi_mean']:>10.1f}")


if __name__ == "__main__":
    main()
