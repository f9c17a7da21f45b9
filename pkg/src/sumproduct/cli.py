"""Command-line entry point: ``sumproduct <subcommand> ...``.

Settings come from three places, highest precedence first: command-line
flags, a ``--config`` file of ``key = value`` lines (keys are the long flag
names, dashes or underscores), then built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import random
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .energy import (
    dyadic_decompose,
    line_statistics,
    point_set,
    select_popular_group,
    stats_csv,
    stats_summary,
)
from .fpcore import (
    DomainError,
    ElementSet,
    Prime,
    SetLiteralError,
    difference_set,
    format_set_literal,
    parse_set_literal,
    product_set,
    ratio_set_simple,
    sumset,
)
from .lemma_engine import FocusConfig, FocusError, focus_lemma, greedy_cover, pr_refine
from .search import (
    BudgetExceeded,
    anneal_extremal,
    exhaustive_scan,
    fit_exponent,
    random_scan,
    random_subset,
    records_csv,
)
from .tracer import (
    ConsistencyError,
    DegenerateInstance,
    HypothesisError,
    TraceConfig,
    run_trace,
    verify_ledger,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_HYPOTHESIS = 3
EXIT_BUDGET = 4
EXIT_LEDGER = 5
EXIT_GOLDEN = 6
EXIT_DEGENERATE = 7
EXIT_REFUSED = 8


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# --------------------------------------------------------------------------
# argument handling
# --------------------------------------------------------------------------


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _unit(text: str) -> Fraction:
    v = _fraction(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"{text} must lie strictly between 0 and 1")
    return v


def _add_set_source(sp):
    g = sp.add_argument_group("input set")
    g.add_argument("--set", dest="set_literal", help='set literal, e.g. "p=7:{1,2,4}"')
    g.add_argument("--gen", choices=("random", "ap", "gp"), help="generate the set instead")
    g.add_argument("--p", type=int, help="prime for --gen")
    g.add_argument("--n", type=int, help="size for --gen")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--start", type=int, default=1)
    g.add_argument("--step", type=int, default=1, help="AP difference")
    g.add_argument("--ratio", type=int, default=2, help="GP ratio")


def _add_output(sp, formats=("text", "json")):
    sp.add_argument("--format", choices=formats, default=formats[0])
    sp.add_argument("--output", help="write here instead of stdout")


def _focus_flags(sp):
    sp.add_argument("--row", type=_fraction, default=FocusConfig.row)
    sp.add_argument("--column", type=_fraction, default=FocusConfig.column)
    sp.add_argument("--line", type=_fraction, default=FocusConfig.line)
    sp.add_argument("--floor", type=_fraction, default=FocusConfig.floor)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sumproduct", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="key=value file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("stats", help="cardinalities, energy and dyadic table of a set")
    _add_set_source(sp)
    _add_output(sp, ("text", "json", "csv"))

    sp = sub.add_parser("lemma", help="run one of the lemma constructions")
    lsub = sp.add_subparsers(dest="lemma", required=True)
    c = lsub.add_parser("cover", help="greedy covering of X1 by translates of X2")
    c.add_argument("--x1", required=True)
    c.add_argument("--x2", required=True)
    c.add_argument("--eps", type=_fraction, default=Fraction(1, 100))
    _add_output(c, ("json",))
    c = lsub.add_parser("pr", help="Pluennecke-Ruzsa refinement of Y against X_1..X_k")
    c.add_argument("--y", required=True)
    c.add_argument("--x", action="append", required=True)
    c.add_argument("--eps", type=_unit, default=Fraction(1, 10))
    _add_output(c, ("json",))
    c = lsub.add_parser("focus", help="focus lemma on the popular dyadic group")
    _add_set_source(c)
    _focus_flags(c)
    _add_output(c, ("json",))

    sp = sub.add_parser("trace", help="run the case analysis and emit the JSON report")
    _add_set_source(sp)
    sp.add_argument("--mode", choices=("product", "ratio"), default="product")
    sp.add_argument("--tau", type=_fraction, default=TraceConfig.tau)
    sp.add_argument("--refine-eps", type=_unit, default=TraceConfig.refine_eps)
    sp.add_argument("--cover-eps", type=_unit, default=TraceConfig.cover_eps)
    sp.add_argument("--pr-eps", type=_unit, default=TraceConfig.pr_eps)
    sp.add_argument("--proportion", type=_unit, default=TraceConfig.proportion)
    _focus_flags(sp)
    sp.add_argument("--golden-check", help="byte-compare the report with this file")
    sp.add_argument("--output", help="write the report here instead of stdout")

    sp = sub.add_parser("scan", help="exhaustive or random scan of max(|A+A|, |A.A|)")
    sp.add_argument("--p", type=int, default=10007)
    sp.add_argument("--n", type=int, default=10)
    sp.add_argument("--exhaustive", action="store_true")
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--budget", type=int, default=5_000_000)
    sp.add_argument("--workers", type=int, default=1)
    _variant_flags(sp)
    _add_output(sp, ("csv", "json"))

    sp = sub.add_parser("anneal", help="simulated annealing for a near-extremal set")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--steps", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--t0", type=float)
    sp.add_argument("--cooling", type=float, default=0.995)
    sp.add_argument("--restarts", type=int, default=1)
    _variant_flags(sp)
    _add_output(sp, ("csv", "json"))

    sp = sub.add_parser("fit", help="log-log exponent fit of per-size minima")
    sp.add_argument("--input", help="CSV with columns n,objective (scan output works)")
    sp.add_argument("--points", help='inline pairs "n:objective,n:objective,..."')
    _add_output(sp, ("json",))
    return parser


def _variant_flags(sp):
    sp.add_argument("--diff", action="store_true", help="use |A-A| instead of |A+A|")
    sp.add_argument("--ratio-set", action="store_true", help="use |A:A| instead of |A.A|")


def _read_config(path: str) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key = value", EXIT_PARSE)
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = _read_config(args.config)
        # re-parse with the file as defaults so explicit flags still win
        for action in _all_actions(parser, args):
            names = {action.dest} | {
                o.lstrip("-").replace("-", "_") for o in action.option_strings if o.startswith("--")
            }
            key = next((k for k in sorted(names) if k in cfg), None)
            if key is not None:
                value = cfg[key]
                if action.type is not None:
                    value = action.type(value)
                elif isinstance(action, argparse._StoreTrueAction):
                    value = value.lower() in ("1", "true", "yes", "on")
                action.default = value
        args = parser.parse_args(argv)
    return args


def _all_actions(parser, args):
    stack = [parser]
    while stack:
        p = stack.pop()
        for action in p._actions:
            if isinstance(action, argparse._SubParsersAction):
                for name, subp in action.choices.items():
                    if name in (getattr(args, "command", None), getattr(args, "lemma", None)):
                        stack.append(subp)
            else:
                yield action


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def _load_set(args) -> ElementSet:
    if args.set_literal:
        return parse_set_literal(args.set_literal)
    if not args.gen:
        raise CliError("give --set or --gen", EXIT_PARSE)
    if args.p is None or args.n is None:
        raise CliError("--gen needs --p and --n", EXIT_PARSE)
    p = Prime(args.p)
    if args.gen == "random":
        items = random_subset(random.Random(args.seed), p, args.n)
    elif args.gen == "ap":
        items = [args.start + k * args.step for k in range(args.n)]
    else:
        items = [args.start * pow(args.ratio, k, p) for k in range(args.n)]
    A = ElementSet.from_iterable(p, items)
    if len(A) != args.n:
        raise CliError(f"generator produced {len(A)} distinct elements, not {args.n}", EXIT_PARSE)
    return A


def _emit(args, text: str) -> None:
    if getattr(args, "output", None):
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def _fr(x) -> str:
    return str(Fraction(x))


def cmd_stats(args) -> int:
    A = _load_set(args)
    warnings = []
    if len(A) ** 2 >= A.prime:
        warnings.append(f"|A|^2 = {len(A) ** 2} >= p = {A.prime}: outside the |A| < sqrt(p) regime")
    has_zero = 0 in A
    if has_zero:
        warnings.append("0 in A: energy and line statistics are skipped")
    sizes = {
        "A": len(A),
        "A+A": len(sumset(A, A)),
        "A-A": len(difference_set(A, A)),
        "A.A": len(product_set(A, A)),
    }
    if not has_zero:
        sizes["A:A"] = len(ratio_set_simple(A, A))
    stats = None if has_zero else line_statistics(A)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.format == "csv":
        if stats is None:
            raise CliError("csv output needs 0 not in A", EXIT_HYPOTHESIS)
        _emit(args, stats_csv(stats))
        return EXIT_OK
    summary = {"set": format_set_literal(A), "sizes": sizes}
    if stats is not None:
        summary.update(stats_summary(stats))
    if args.format == "json":
        _emit(args, json.dumps(summary, sort_keys=True, indent=1) + "\n")
        return EXIT_OK
    lines = [f"set   {summary['set']}"]
    lines += [f"|{k}| = {v}" for k, v in sizes.items()]
    if stats is not None:
        lines.append(f"E_*(A) = {summary['E']}")
        lines.append("j  L  M")
        lines += [f"{g['j']}  {g['L']}  {g['M']}" for g in summary["groups"]]
    _emit(args, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_lemma(args) -> int:
    if args.lemma == "cover":
        X1, X2 = parse_set_literal(args.x1), parse_set_literal(args.x2)
        res = greedy_cover(X1, X2, args.eps)
        out = {
            "translates": list(res.translates),
            "covered_fraction": _fr(res.covered_fraction),
            "bound_ratio": _fr(res.bound_ratio),
        }
    elif args.lemma == "pr":
        Y = parse_set_literal(args.y)
        Xs = [parse_set_literal(x) for x in args.x]
        res = pr_refine(Y, Xs, args.eps)
        out = {
            "Y_prime": format_set_literal(res.Y_prime),
            "sum_size": res.sum_size,
            "constant": _fr(res.constant),
        }
    else:
        A = _load_set(args)
        if 0 in A:
            raise CliError("0 in A", EXIT_HYPOTHESIS)
        stats = line_statistics(A)
        g = select_popular_group(dyadic_decompose(stats))
        cfg = FocusConfig(args.row, args.column, args.line, args.floor)
        res = focus_lemma(g, point_set(stats, g.slopes), len(A), cfg)
        out = {
            "group": g.to_dict(),
            "x_tilde": res.x_tilde,
            "y_tilde": res.y_tilde,
            "B": res.B.tolist(),
            "C": res.C.tolist(),
            "B_tilde": res.B_tilde.tolist(),
            "intersections": {str(z): I.tolist() for z, I in res.intersections.items()},
            "c1": _fr(res.c1),
            "c2": _fr(res.c2),
            "c3": _fr(res.c3),
            "sigma": res.sigma,
            "c_sigma": _fr(res.c_sigma),
        }
    _emit(args, json.dumps(out, sort_keys=True, indent=1) + "\n")
    return EXIT_OK


def cmd_trace(args) -> int:
    A = _load_set(args)
    config = TraceConfig(
        mode=args.mode,
        refine_eps=args.refine_eps,
        cover_eps=args.cover_eps,
        pr_eps=args.pr_eps,
        proportion=args.proportion,
        tau=args.tau,
        focus=FocusConfig(args.row, args.column, args.line, args.floor),
    )
    report = run_trace(A, config)
    text = report.to_json()
    _emit(args, text)
    problems = verify_ledger(text)
    for msg in problems:
        print(f"ledger: {msg}", file=sys.stderr)
    if problems:
        return EXIT_LEDGER
    if args.golden_check:
        if Path(args.golden_check).read_bytes() != text.encode():
            print(f"golden mismatch: {args.golden_check}", file=sys.stderr)
            return EXIT_GOLDEN
    return EXIT_OK


def _variants(args):
    return ("diff" if args.diff else "sum"), ("ratio" if args.ratio_set else "prod")


def cmd_scan(args) -> int:
    add, mul = _variants(args)
    if args.exhaustive:
        rec, hist = exhaustive_scan(args.p, args.n, args.budget, add, mul, args.workers)
        if args.format == "json":
            out = {**rec.row(), "members": list(rec.members), "histogram": {str(k): v for k, v in hist.items()}}
            _emit(args, json.dumps(out, sort_keys=True, indent=1) + "\n")
        else:
            _emit(args, records_csv([rec]))
        return EXIT_OK
    recs = random_scan(args.p, args.n, args.samples, args.seed, add, mul, args.workers)
    if args.format == "json":
        best = min(recs, key=lambda r: r.objective) if recs else None
        out = {"count": len(recs), "min": best.row() if best else None}
        _emit(args, json.dumps(out, sort_keys=True, indent=1) + "\n")
    else:
        _emit(args, records_csv(recs))
    return EXIT_OK


def cmd_anneal(args) -> int:
    add, mul = _variants(args)
    rec = anneal_extremal(
        args.p, args.n, args.steps, args.seed, args.t0, args.cooling, add, mul, restarts=args.restarts
    )
    if args.format == "json":
        _emit(args, json.dumps({**rec.row(), "members": list(rec.members)}, sort_keys=True, indent=1) + "\n")
    else:
        _emit(args, records_csv([rec]))
    return EXIT_OK


def cmd_fit(args) -> int:
    pairs = []
    if args.points:
        for chunk in args.points.split(","):
            try:
                n, obj = chunk.split(":")
                pairs.append((int(n), int(obj)))
            except ValueError:
                raise CliError(f"bad point {chunk!r}; expected n:objective", EXIT_PARSE) from None
    if args.input:
        with open(args.input, newline="") as fh:
            for row in csv.DictReader(fh):
                pairs.append((int(row["n"]), int(row["objective"])))
    fit = fit_exponent(pairs)
    _emit(args, json.dumps(fit.to_dict(), sort_keys=True, indent=1) + "\n")
    return EXIT_OK


COMMANDS = {
    "stats": cmd_stats,
    "lemma": cmd_lemma,
    "trace": cmd_trace,
    "scan": cmd_scan,
    "anneal": cmd_anneal,
    "fit": cmd_fit,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_PARSE if exc.code else EXIT_OK
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except SetLiteralError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except HypothesisError as exc:
        print(f"hypothesis violated: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except BudgetExceeded as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except DegenerateInstance as exc:
        print(f"degenerate instance: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (FocusError, ConsistencyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except DomainError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED


if __name__ == "__main__":
    sys.exit(main())
