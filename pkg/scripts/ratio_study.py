"""Log posterior ratios of perturbed patterns against the truth, for growing p.

Writes one CSV row per (p, case, prior, rep) and prints the fraction of
negative ratios and the median per case.

    python3 scripts/ratio_study.py --p-list 150,300,450 --reps 20 --out ratios.csv
"""

import argparse
import csv
import sys

import numpy as np

from cholsel.cli import main as cli_main


def parse_args(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p-list", default="150,300,450")
    ap.add_argument("--sparsity", type=float, default=0.03)
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--alpha2", type=float, default=None, help="override alpha2 = p^2")
    ap.add_argument("--out", default="ratios.csv")
    return ap.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    cli_args = ["ratio-experiment", "--p-list", args.p_list, "--sparsity", str(args.sparsity),
                "--reps", str(args.reps), "--seed", str(args.seed), "--jobs", str(args.jobs),
                "--out", args.out]
    if args.alpha2 is not None:
        cli_args += ["--alpha2", str(args.alpha2)]
    cli_main(cli_args)
    with open(args.out) as fh:
        rows = list(csv.DictReader(fh))
    p_list = [int(x) for x in args.p_list.split(",")]
    print(f"{'prior':15s} case  p     negative  median log ratio")
    for prior in sorted({r["prior"] for r in rows}):
        for case in (1, 2, 3, 4):
            for p in p_list:
                vals = np.array([float(r["log_ratio"]) for r in rows if r["prior"] == prior
                                 and int(r["case"]) == case and int(r["p"]) == p])
                print(f"{prior:15s} {case}     {p:<5d} {np.mean(vals < 0):8.2f}  {np.median(vals):.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
