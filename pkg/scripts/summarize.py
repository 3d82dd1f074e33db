"""Print per-cell policy means from a results.csv written by the CLI.

    python scripts/summarize.py results/table2/results.csv [--metric makespan]
"""

import argparse
import csv
import statistics
from collections import defaultdict

POLICY_ORDER = ("rnd", "seq", "dhlb", "dralb")
GRID = ("hosts", "vms_per_host", "tasks", "arrival_rate", "batch_arrivals")


def summarize(path, metric):
    groups = defaultdict(list)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = tuple(row[k] for k in GRID)
            groups[key, row["policy"]].append(float(row[metric]))
    points = sorted({k for k, _ in groups}, key=lambda k: tuple(float(x) for x in k))
    header = "  ".join(f"{g:>12}" for g in GRID) + "  " + "  ".join(f"{p:>10}" for p in POLICY_ORDER)
    lines = [f"mean {metric} over seeds", header]
    for pt in points:
        vals = [statistics.fmean(groups[pt, p]) if groups.get((pt, p)) else float("nan")
                for p in POLICY_ORDER]
        lines.append("  ".join(f"{x:>12}" for x in pt) + "  "
                     + "  ".join(f"{v:10.3f}" for v in vals))
    return "\n".join(lines)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("csv")
    p.add_argument("--metric", default="makespan")
    args = p.parse_args(argv)
    print(summarize(args.csv, args.metric))


if __name__ == "__main__":
    main()
