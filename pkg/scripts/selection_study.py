"""Threshold + stochastic search selection against simulated truth.

Prints mean PPV / TPR / MCC per p and writes the per-rep rows (plus mean
rows) as CSV.

    python3 scripts/selection_study.py --p-list 300 --reps 5 --prior beta-mixture
"""

import argparse
import sys

from cholsel.cli import main as cli_main


def parse_args(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p-list", default="300")
    ap.add_argument("--sparsity", type=float, default=0.03)
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--prior", default="beta-mixture")
    ap.add_argument("--alpha2", type=float, default=None, help="override alpha2 = p^2")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="selection.csv")
    return ap.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    cli_args = ["select", "--p-list", args.p_list, "--sparsity", str(args.sparsity),
                "--reps", str(args.reps), "--seed", str(args.seed), "--prior", args.prior,
                "--jobs", str(args.jobs), "--out", args.out]
    if args.alpha2 is not None:
        cli_args += ["--alpha2", str(args.alpha2)]
    cli_main(cli_args)
    with open(args.out) as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            row = dict(zip(header, line.strip().split(",")))
            if row["rep"] == "mean":
                print(f"p={row['p']} n={row['n']} {row['prior']}: PPV {float(row['ppv']):.3f} "
                      f"TPR {float(row['tpr']):.3f} MCC {float(row['mcc']):.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
