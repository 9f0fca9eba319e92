"""Command line: ``gesolve {solve,map,eval,oracle,grammar-check}``.

Exit status is 0 on success, 2 on invalid input or configuration and 1 on
runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_config_file, load_grammar, merge, resolve
from .evolution import evolve
from .expr import DomainError, ExpressionSyntaxError, RbfConfig, evaluate, parse_expression
from .grammar import GrammarError, grammar_to_bnf
from .mapper import Mapped, format_trace, map_genotype
from .quantum import PRESETS, Evaluator, fd_eigenpair

log = logging.getLogger("gesolve")

TRACE_COLUMNS = ["t", "best", "mean", "worst", "pc", "invalid_count"]


class UsageError(Exception):
    pass


def _float_pair(text):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a,b but got {text!r}") from None
    return a, b


def _codons(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"codons must be comma separated integers, got {text!r}") from None


def _add_problem_args(p):
    g = p.add_argument_group("problem")
    g.add_argument("--problem", choices=PRESETS, help="bundled problem preset (default: box)")
    g.add_argument("--potential-expr", help="custom potential V(x), e.g. 'x*x/2'")
    g.add_argument("--domain", type=_float_pair, metavar="A,B")
    g.add_argument("--energy", help="fixed energy value or 'rayleigh'")
    g.add_argument("--omega", type=float, help="harmonic frequency")
    g.add_argument("--hbar", type=float)
    g.add_argument("--mass", type=float)
    g.add_argument("--points", type=int, dest="T", help="number of collocation points T")
    g.add_argument("--lambda-norm", type=float)
    g.add_argument("--mu-boundary", type=float)
    g.add_argument("--norm-convention", choices=["psi_squared", "psi_literal"])
    g.add_argument("--residual-abs", action="store_true", help="sum |residual| instead of squares")
    g.add_argument("--c", type=float, help="RBF shape constant")
    g.add_argument("--config", help="JSON run configuration (or a previous report.json)")
    g.add_argument("--grammar", help="BNF grammar file (default: builtin x-only grammar)")


def _problem_overrides(args) -> dict:
    prob = {}
    if args.problem:
        prob["preset"] = args.problem
    if args.potential_expr:
        prob["potential"] = "custom"
        prob["potential_expr"] = args.potential_expr
    if args.omega is not None:
        prob["omega"] = args.omega
    if args.domain:
        prob["a"], prob["b"] = args.domain
    if args.energy is not None:
        if args.energy == "rayleigh":
            prob["energy_mode"] = "rayleigh"
        else:
            try:
                prob["energy"] = float(args.energy)
            except ValueError:
                raise ConfigError("energy", f"expected a number or 'rayleigh', got {args.energy!r}") from None
            prob["energy_mode"] = "fixed"
    for key in ("hbar", "mass", "T", "lambda_norm", "mu_boundary", "norm_convention"):
        v = getattr(args, key)
        if v is not None:
            prob[key] = v
    if args.residual_abs:
        prob["residual_mode"] = "abs"
    doc = {"problem": prob}
    if args.c is not None:
        doc["rbf"] = {"c": args.c}
    if args.grammar:
        doc["grammar"] = args.grammar
    return doc


def _document(args, extra=None) -> dict:
    doc = load_config_file(args.config) if args.config else {}
    over = _problem_overrides(args)
    if args.config and "preset" in over["problem"]:
        # a preset flag replaces the file's problem section wholesale
        doc = dict(doc, problem={})
    doc = merge(doc, over)
    if extra:
        doc = merge(doc, extra)
    if "preset" not in doc.get("problem", {}) and "potential" not in doc.get("problem", {}):
        doc.setdefault("problem", {})["preset"] = "box"
    return doc


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_solve(args) -> int:
    evo = {}
    for flag, key in [
        ("pop", "population_size"),
        ("gens", "max_generations"),
        ("seed", "rng_seed"),
        ("k", "tournament_size"),
        ("pc0", "pc0"),
        ("gamma", "gamma"),
        ("pc_form", "pc_form"),
        ("init_mode", "init_mode"),
        ("tolerance", "fitness_tolerance"),
        ("threads", "threads"),
        ("length", "chromosome_length"),
        ("codon_max", "codon_max"),
        ("max_wraps", "max_wraps"),
    ]:
        v = getattr(args, flag)
        if v is not None:
            evo[key] = v
    run = resolve(_document(args, {"evolution": evo}))
    echo = run.echo()

    def progress(s):
        log.info("gen %d best=%.6g mean=%.6g pc=%.3f %s", s.t, s.best_total, s.mean_total, s.pc, s.best_expression)

    report = evolve(run.problem, run.grammar, run.evolution, run.rbf, config_echo=echo, callback=progress)
    doc = report.to_dict()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        write_trace(out / "trace.csv", report.stats)
    best = doc["best"]
    fit = best["fitness"]
    print(f"termination: {doc['termination']} after {doc['generations']} generations")
    print(f"best: {best['expression']}")
    print(
        f"total={fit['total']!r} residual={fit['residual_sse']!r} "
        f"norm_penalty={fit['norm_penalty']!r} boundary_penalty={fit['boundary_penalty']!r}"
    )
    return 0


def write_trace(path, stats):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for s in stats:
            w.writerow([s.t, repr(s.best_total), repr(s.mean_total), repr(s.worst_total), repr(s.pc), s.invalid_count])


def read_trace(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [
        {k: (int(v) if k in ("t", "invalid_count") else float(v)) for k, v in row.items()} for row in rows
    ]


def cmd_map(args) -> int:
    if not args.codons:
        raise UsageError("--codons needs at least one codon")
    grammar = load_grammar(args.grammar, default_variant=args.builtin)
    out = map_genotype(grammar, args.codons, args.max_wraps)
    print(format_trace(out.trace, args.codons))
    if isinstance(out, Mapped):
        print(out.text)
    else:
        label = "wrap limit" if out.reason == "wrap_limit_exceeded" else out.reason
        print(f"REJECTED: {label}")
    return 0


def cmd_eval(args) -> int:
    try:
        expr = parse_expression(args.expr)
    except ExpressionSyntaxError as exc:
        raise UsageError(str(exc)) from None
    if args.at is not None:
        rbf = RbfConfig(args.c if args.c is not None else 1.0)
        try:
            print(repr(evaluate(expr, {"x": args.at}, rbf)))
        except DomainError as exc:
            print(f"domain error: {exc}")
        return 0
    run = resolve(_document(args))
    rep = Evaluator(run.problem, run.rbf)(expr)
    for key, value in rep.to_dict().items():
        print(f"{key}: {value!r}" if isinstance(value, float) else f"{key}: {value}")
    return 0


def cmd_oracle(args) -> int:
    run: RunConfig = resolve(_document(args))
    if args.N < 10:
        raise ConfigError("N", "grid size must be at least 10")
    E, _ = fd_eigenpair(run.problem, args.N, args.index, run.rbf)
    print(repr(E))
    return 0


def cmd_grammar_check(args) -> int:
    grammar = load_grammar(args.grammar, default_variant=args.builtin)
    print(f"start: <{grammar.start}>")
    for nt in sorted(grammar.nonterminals):
        print(f"<{nt}>: {len(grammar.rules_for(nt))} alternatives")
    if args.print:
        print(grammar_to_bnf(grammar), end="")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gesolve", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="evolve a trial wavefunction")
    _add_problem_args(p)
    e = p.add_argument_group("evolution")
    e.add_argument("--pop", type=int)
    e.add_argument("--gens", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--k", type=int, help="tournament size")
    e.add_argument("--pc0", type=float)
    e.add_argument("--gamma", type=float)
    e.add_argument("--pc-form", choices=["standard", "paper_literal"])
    e.add_argument("--init-mode", choices=["random", "permutation"])
    e.add_argument("--tolerance", type=float)
    e.add_argument("--threads", type=int)
    e.add_argument("--length", type=int, help="chromosome length")
    e.add_argument("--codon-max", type=int)
    e.add_argument("--max-wraps", type=int)
    p.add_argument("--out", help="directory for report.json and trace.csv")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("map", help="show the genotype to phenotype derivation")
    p.add_argument("--codons", type=_codons, required=True, metavar="V1,V2,...")
    p.add_argument("--grammar", help="BNF grammar file")
    p.add_argument("--builtin", choices=["xyz", "x_only"], default="xyz")
    p.add_argument("--max-wraps", type=int, default=2)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("eval", help="evaluate an expression or score it as a wavefunction")
    p.add_argument("--expr", required=True)
    p.add_argument("--at", type=float, help="print the value at this x instead of the fitness")
    _add_problem_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle", help="finite-difference eigenvalue")
    _add_problem_args(p)
    p.add_argument("--N", type=int, default=2000, help="interior grid points")
    p.add_argument("--index", type=int, default=0, help="0 for the ground state")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("grammar-check", help="validate a grammar file")
    p.add_argument("--grammar")
    p.add_argument("--builtin", choices=["xyz", "x_only"], default="x_only")
    p.add_argument("--print", action="store_true", help="also print the normalized grammar")
    p.set_defaults(func=cmd_grammar_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, GrammarError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
