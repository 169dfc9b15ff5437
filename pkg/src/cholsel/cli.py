"""Command line interface.

Every subcommand writes CSV with a header row; floats carry 17 significant
digits so that output is reproducible bit for bit.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import astuple, fields

import numpy as np

from . import __version__
from .config import PRIOR_KINDS, Hyperparameters, SearchConfig
from .experiments import (
    RATIO_PRIORS,
    metrics,
    n_for,
    ratio_experiment,
    selection_experiment,
    simulate,
)
from .linalg import read_data, sample_covariance, write_data
from .pattern import ConfusionCounts, all_patterns, compare, read_pattern, write_pattern
from .priors import (
    check_hyperparameters,
    log_prior_multiplicative_laplace,
    log_prior_multiplicative_quadrature,
)
from .scoring import total_score
from .search import select_pattern

HYPER_FLAGS = ("tau_sq", "lambda1", "lambda2", "alpha1", "alpha2", "c", "q", "max_col_support")


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _write_csv(header, rows, out) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _edge_string(pattern) -> str:
    return ";".join(f"{k + 1}-{j + 1}" for k, j in pattern.edges())


def _int_list(text: str) -> list[int]:
    return [int(x) for x in str(text).split(",") if x.strip()]


def _hyper(args, n: int, p: int) -> Hyperparameters:
    overrides = {k: getattr(args, k) for k in HYPER_FLAGS if getattr(args, k, None) is not None}
    return Hyperparameters.experiment_defaults(n, p, args.prior, **overrides)


def _hyper_overrides(args) -> dict:
    return {k: getattr(args, k) for k in HYPER_FLAGS if getattr(args, k, None) is not None}


def _search_config(args) -> SearchConfig:
    return SearchConfig(grid_start=args.grid_start, grid_end=args.grid_end,
                        grid_step=args.grid_step, ridge=args.ridge,
                        sss_iterations=args.sss_iters, sss_top_m=args.top_m,
                        n_seeds=args.n_seeds, seed=args.seed)


# subcommands -------------------------------------------------------------------


def cmd_simulate(args) -> int:
    """Data CSV (header y1..yp) plus the true pattern in the text pattern format."""
    if args.out in (None, "-"):
        raise SystemExit("simulate needs --out for the data file")
    n = args.n if args.n is not None else n_for(args.p)
    _, truth, Y = simulate(args.p, n, args.sparsity, args.seed, args.signal)
    write_data(Y, args.out)
    write_pattern(truth, args.truth or f"{args.out}.pattern")
    return 0


def cmd_score(args) -> int:
    Y = read_data(args.data)
    n, p = Y.shape
    hyper = _hyper(args, n, p)
    stats = sample_covariance(Y, hyper.tau_sq)
    rows = []
    for path in args.pattern:
        s = total_score(read_pattern(path), stats, hyper)
        rows.append((path, s.pattern.n_edges, s.prior_term, s.total - s.prior_term, s.total))
    _write_csv(("pattern", "edges", "log_prior", "log_likelihood", "log_posterior"), rows, args.out)
    return 0


def cmd_ratio(args) -> int:
    priors = RATIO_PRIORS if args.prior_given is None else (args.prior,)
    rows = ratio_experiment(_int_list(args.p_list), sparsity=args.sparsity, reps=args.reps,
                            seed=args.seed, priors=priors, jobs=args.jobs,
                            **_hyper_overrides(args))
    _write_csv(("p", "n", "case", "prior", "rep", "log_ratio"), (astuple(r) for r in rows), args.out)
    return 0


def cmd_select(args) -> int:
    cfg = _search_config(args)
    if args.data is not None:
        Y = read_data(args.data)
        n, p = Y.shape
        hyper = _hyper(args, n, p)
        result = select_pattern(sample_covariance(Y, hyper.tau_sq), hyper, cfg)
        if args.pattern_out:
            write_pattern(result.best.pattern, args.pattern_out)
        rows = [(rank + 1, s.pattern.n_edges, s.prior_term, s.total, _edge_string(s.pattern))
                for rank, s in enumerate(result.top_m)]
        _write_csv(("rank", "edges", "log_prior", "log_posterior", "edge_list"), rows, args.out)
        return 0
    rows = selection_experiment(_int_list(args.p_list), sparsity=args.sparsity, cfg=cfg,
                                prior=args.prior, reps=args.reps, seed=args.seed, n=args.n,
                                jobs=args.jobs, **_hyper_overrides(args))
    header = [f.name for f in fields(rows[0])] if rows else ["p"]
    out_rows = [astuple(r) for r in rows]
    for p in sorted({r.p for r in rows}):
        sel = [r for r in rows if r.p == p]
        mean = lambda k: float(np.mean([getattr(r, k) for r in sel]))
        out_rows.append((p, sel[0].n, "mean", sel[0].prior, mean("tp"), mean("fp"), mean("fn"),
                         mean("tn"), mean("ppv"), mean("tpr"), mean("mcc"), mean("edges"),
                         mean("score")))
    _write_csv(header, out_rows, args.out)
    return 0


def cmd_metrics(args) -> int:
    if args.estimate and args.truth:
        counts = compare(read_pattern(args.estimate), read_pattern(args.truth))
    elif None not in (args.tp, args.fp, args.fn, args.tn):
        counts = ConfusionCounts(args.tp, args.fp, args.fn, args.tn)
    else:
        raise SystemExit("metrics needs --estimate and --truth, or all of --tp --fp --fn --tn")
    m = metrics(counts)
    _write_csv(("tp", "fp", "fn", "tn", "ppv", "tpr", "mcc"),
               [(counts.tp, counts.fp, counts.fn, counts.tn, m.ppv, m.tpr, m.mcc)], args.out)
    return 0


def cmd_check_hyper(args) -> int:
    n = args.n if args.n is not None else n_for(args.p)
    hyper = _hyper(args, n, args.p)
    diags = check_hyperparameters(hyper, args.p, n, args.d, kappa=args.kappa)
    for d in diags:
        print(d, file=sys.stderr)
    _write_csv(("check", "message"), [(d.check, d.message) for d in diags], args.out)
    return 0


def cmd_laplace_diag(args) -> int:
    a1 = args.alpha1 if args.alpha1 is not None else 1.0
    a2 = args.alpha2 if args.alpha2 is not None else 1.0
    rows = []
    for i, Z in enumerate(all_patterns(args.p)):
        lap = log_prior_multiplicative_laplace(Z, a1, a2)
        quad = log_prior_multiplicative_quadrature(Z, a1, a2, nodes=args.nodes)
        rows.append((i, Z.n_edges, _edge_string(Z), lap.log_value, quad,
                     abs(lap.log_value - quad), lap.converged, lap.newton_iters))
    _write_csv(("index", "edges", "edge_list", "laplace", "quadrature", "abs_error",
                "converged", "newton_iters"), rows, args.out)
    return 0


# parser ------------------------------------------------------------------------


def _common(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("common")
    g.add_argument("--seed", type=int, default=0, help="master seed (u64)")
    g.add_argument("--out", default=None, help="output path (default stdout)")
    g.add_argument("--prior", choices=PRIOR_KINDS, default=None)
    g.add_argument("--p", type=int, default=None)
    g.add_argument("--n", type=int, default=None, help="sample size (default floor(p/3))")
    g.add_argument("--sparsity", type=float, default=0.03)
    g.add_argument("--reps", type=int, default=20)
    g.add_argument("--jobs", "--threads", dest="jobs", type=int, default=1,
                   help="worker processes; output does not depend on it")
    g.add_argument("--config", default=None, help="flat key=value file; flags win")
    h = parser.add_argument_group("hyperparameters")
    h.add_argument("--tau-sq", dest="tau_sq", type=float, default=None, help="default n")
    h.add_argument("--lambda1", type=float, default=None)
    h.add_argument("--lambda2", type=float, default=None)
    h.add_argument("--alpha1", type=float, default=None)
    h.add_argument("--alpha2", type=float, default=None, help="default p^c")
    h.add_argument("--c", type=float, default=None)
    h.add_argument("--q", type=float, default=None, help="Erdos-Renyi edge probability")
    h.add_argument("--max-support", dest="max_col_support", type=int, default=None,
                   help="column support cap (default floor(n/log n))")
    s = parser.add_argument_group("search")
    s.add_argument("--grid-start", type=float, default=0.1)
    s.add_argument("--grid-end", type=float, default=0.5)
    s.add_argument("--grid-step", type=float, default=1e-4)
    s.add_argument("--ridge", type=float, default=0.5)
    s.add_argument("--sss-iters", type=int, default=500)
    s.add_argument("--top-m", type=int, default=10)
    s.add_argument("--n-seeds", type=int, default=3)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cholsel", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        _common(sp)
        sp.set_defaults(func=func)
        return sp

    sp = add("simulate", cmd_simulate, "draw a sparse truth and Gaussian data")
    sp.add_argument("--signal", type=float, default=0.5)
    sp.add_argument("--truth", default=None, help="pattern file (default <out>.pattern)")

    sp = add("score", cmd_score, "log posterior of pattern files given data")
    sp.add_argument("--data", required=True)
    sp.add_argument("--pattern", action="append", required=True)

    sp = add("ratio-experiment", cmd_ratio, "log posterior ratios of perturbed patterns")
    sp.add_argument("--p-list", default="150,300,450")

    sp = add("select", cmd_select, "threshold + stochastic search selection")
    sp.add_argument("--data", default=None, help="select on this data instead of simulating")
    sp.add_argument("--pattern-out", default=None)
    sp.add_argument("--p-list", default="300")

    sp = add("metrics", cmd_metrics, "PPV, TPR and MCC")
    sp.add_argument("--estimate")
    sp.add_argument("--truth")
    for k in ("tp", "fp", "fn", "tn"):
        sp.add_argument(f"--{k}", type=int, default=None)

    sp = add("check-hyper", cmd_check_hyper, "warn about hyperparameter rate violations")
    sp.add_argument("--d", type=int, default=1, help="estimated maximum column degree")
    sp.add_argument("--kappa", type=float, default=2.0)

    sp = add("laplace-diag", cmd_laplace_diag, "Laplace vs quadrature multiplicative prior")
    sp.add_argument("--nodes", type=int, default=16)
    sp.set_defaults(p=3)
    return parser


def read_config(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; keys use flag names."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SystemExit(f"{path}:{lineno}: expected key = value")
            key, value = (x.strip() for x in line.split("=", 1))
            out[key.lstrip("-").replace("-", "_")] = value
    return out


_ALIASES = {"max_support": "max_col_support", "threads": "jobs"}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        config = {_ALIASES.get(k, k): v for k, v in read_config(args.config).items()}
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        unknown = sorted(set(config) - set(known))
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        sub.set_defaults(**config)
        args = parser.parse_args(argv)
    args.prior_given = args.prior
    if args.prior is None:
        args.prior = "beta-mixture"
    if args.command in ("simulate", "check-hyper") and args.p is None:
        parser.error(f"{args.command} needs --p")
    if args.command in ("select", "ratio-experiment") and args.p is not None:
        args.p_list = str(args.p)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
