"""Command-line interface: ``cglscm generate|fit|query|benchmark``.

Exit codes: 0 success, 1 benchmark tolerance failure, 2 usage or parse
error, 3 numerical failure.

Interventional answers are exact for the given model. For a *fitted* model
they estimate the generator's answer only when the query is identifiable
from the graph; this tool does not check identifiability.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path



from . import benchmarks
from .estimation import FitConfig, FitDivergence, fit, fit_edges, fitted_model
from .graph import StructureError
from .model import NumericalError
from .query import DoQuery, QueryError, intervene
from .sampler import read_csv, sample, write_csv
from .specfile import SpecParseError, dump_model, load_graph, load_model, save_model

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _assignment(text):
    node, sep, value = text.partition("=")
    if not sep or not node:
        raise argparse.ArgumentTypeError(f"expected NODE=VALUE, got {text!r}")
    try:
        return node.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {value!r}") from None


def _add_fit_flags(p):
    defaults = FitConfig()
    p.add_argument("--eta", type=float, default=defaults.eta,
                   help="gradient step on the per-sample average gradient")
    p.add_argument("--em-tol", type=float, default=defaults.em_tol,
                   help="relative log-likelihood change that stops EM")
    p.add_argument("--max-iters", type=_positive_int, default=defaults.max_em_iters,
                   help="maximum EM iterations")
    p.add_argument("--max-inner-iters", type=_positive_int, default=defaults.max_inner_iters)
    p.add_argument("--inner-tol", type=float, default=defaults.inner_tol)
    p.add_argument("--init-scale", type=float, default=defaults.init_scale)


def _fit_config(args, seed):
    return FitConfig(eta=args.eta, max_em_iters=args.max_iters,
                     max_inner_iters=args.max_inner_iters, em_tol=args.em_tol,
                     inner_tol=args.inner_tol, init_scale=args.init_scale, seed=seed)


def build_parser():
    parser = argparse.ArgumentParser(prog="cglscm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a CSV dataset from a model spec")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit", help="estimate a model from data over a known graph")
    p.add_argument("--graph", required=True, help="graph or model spec (weights ignored)")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="fitted model spec; trace and raw fit "
                   "go to OUT.trace.csv and OUT.fit.json")
    p.add_argument("--seed", type=int, default=0, help="initialization seed")
    p.add_argument("--no-repair", dest="repair", action="store_false",
                   help="skip the edge-consistent refinement after the free-B fit")
    _add_fit_flags(p)

    p = sub.add_parser("query", help="answer P(target | do(...)) on a model spec")
    p.add_argument("--model", required=True)
    p.add_argument("--do", type=_assignment, action="append", required=True,
                   metavar="NODE=VALUE")
    p.add_argument("--target", required=True)

    p = sub.add_parser("benchmark", help="run a built-in generate/fit/compare benchmark")
    p.add_argument("name", choices=sorted(benchmarks.BENCHMARKS))
    p.add_argument("--n", type=_positive_int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mean-tol", type=float, default=0.15)
    p.add_argument("--var-tol", type=float, default=0.10)
    p.add_argument("--no-repair", dest="repair", action="store_false",
                   help="evaluate queries on the free-B fit (edges read off B) only")
    p.add_argument("--out", help="write the report as JSON to this path")
    _add_fit_flags(p)
    return parser


def cmd_generate(args):
    model = load_model(args.model)
    write_csv(sample(model, args.n, args.seed), args.out)
    return EXIT_OK


def _write_trace(result, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "loglik", "grad_norm_B", "grad_norm_C"])
        w.writerow([0, repr(result.loglik_trace[0]), "", ""])
        for i, (ll, gb, gc) in enumerate(zip(result.loglik_trace[1:], result.grad_norm_B,
                                             result.grad_norm_C), 1):
            w.writerow([i, repr(ll), repr(gb), repr(gc)])


def cmd_fit(args):
    g = load_graph(args.graph)
    try:
        data = read_csv(args.data).reordered(g.nodes)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    cfg = _fit_config(args, args.seed)
    result = fit(g, data, cfg)
    model, report = fitted_model(g, result)
    raw = {"B_hat": result.B_hat.tolist(), "C_hat": result.C_hat.tolist(),
           "mu_hat": result.mu_hat.tolist(), "converged": result.converged,
           "iterations": result.iterations, "final_loglik": result.loglik_trace[-1],
           "eta": result.eta, "edge_recovery_residual": report.reconstruction_residual}
    if args.repair:
        result = fit_edges(g, data, cfg, start=(model.T, model.C, model.mu))
        model, _ = fitted_model(g, result)
        raw["repair"] = {"converged": result.converged, "iterations": result.iterations,
                         "final_loglik": result.loglik_trace[-1]}
    out = Path(args.out)
    save_model(model, out)
    _write_trace(result, str(out) + ".trace.csv")
    Path(str(out) + ".fit.json").write_text(json.dumps(raw, indent=2) + "\n")
    print(f"wrote {out} (loglik {result.loglik_trace[-1]:.6f}, "
          f"{result.iterations} EM iterations, converged={result.converged}, "
          f"edge-recovery residual {report.reconstruction_residual:.3g})")
    return EXIT_OK


def cmd_query(args):
    model = load_model(args.model)
    q = DoQuery(dict(args.do), args.target)
    print(intervene(model, q))
    return EXIT_OK


def cmd_benchmark(args):
    report = benchmarks.run_benchmark(
        args.name, n=args.n, seed=args.seed, cfg=_fit_config(args, args.seed),
        mean_tol=args.mean_tol, var_tol=args.var_tol, repair=args.repair)
    print(report.format())
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return EXIT_OK if report.passed else EXIT_FAIL


COMMANDS = {"generate": cmd_generate, "fit": cmd_fit, "query": cmd_query,
            "benchmark": cmd_benchmark}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, SpecParseError, StructureError, QueryError, KeyError,
            OSError, ValueError) as exc:
        print(f"cglscm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FitDivergence, NumericalError, FloatingPointError) as exc:
        print(f"cglscm {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
