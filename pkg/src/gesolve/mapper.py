"""Genotype to phenotype mapping: integer codons select grammar rules."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

from .expr import Expression, ExpressionSyntaxError, parse_expression
from .grammar import Grammar, GrammarSymbol

__all__ = [
    "TraceStep",
    "Mapped",
    "Rejected",
    "MappingOutcome",
    "map_genotype",
    "format_trace",
    "validate_chromosome",
]

WRAP_LIMIT_EXCEEDED = "wrap_limit_exceeded"
INVALID_EXPRESSION = "invalid_expression"


@dataclass(frozen=True)
class TraceStep:
    derivation: str  # partial string before this step
    nonterminal: str  # the nonterminal being rewritten
    position: int  # codon index in the chromosome
    codon: int
    rules: int  # R, number of alternatives
    choice: int  # codon mod R
    wraps: int

    @property
    def operation(self) -> str:
        return f"{self.codon} mod {self.rules}={self.choice}"


@dataclass(frozen=True)
class Mapped:
    expression: Expression
    text: str
    trace: tuple[TraceStep, ...]

    @property
    def codons_used(self) -> int:
        return len(self.trace)


@dataclass(frozen=True)
class Rejected:
    reason: str
    trace: tuple[TraceStep, ...]
    text: str = ""


MappingOutcome = Union[Mapped, Rejected]


def validate_chromosome(codons: Sequence[int], codon_max: int | None = None) -> tuple[int, ...]:
    codons = tuple(int(c) for c in codons)
    if not codons:
        raise ValueError("chromosome must contain at least one codon")
    if any(c < 0 for c in codons):
        raise ValueError("codons must be non-negative")
    if codon_max is not None and any(c > codon_max for c in codons):
        raise ValueError(f"codons must not exceed {codon_max}")
    return codons


def _render(symbols) -> str:
    return "".join(str(s) for s in symbols)


def map_genotype(
    g: Grammar, codons: Sequence[int], max_wraps: int = 2, derivations: bool = True
) -> MappingOutcome:
    """Leftmost derivation from the start symbol, one codon per rewrite.

    Reading past the last codon restarts at the first and counts a wrap;
    a derivation that would need more than ``max_wraps`` wraps is rejected.
    Single-alternative nonterminals still consume a codon.  With
    ``derivations=False`` the per-step partial strings are left empty, which
    is much cheaper inside the evolution loop.
    """
    codons = validate_chromosome(codons)
    n = len(codons)
    # the sentential form is kept as a list; nonterminals are GrammarSymbols
    form: list[GrammarSymbol] = [GrammarSymbol("nonterminal", g.start)]
    trace = []
    pos = wraps = idx = 0
    while True:
        # everything left of the previous rewrite is already terminal
        while idx < len(form) and not form[idx].is_nonterminal:
            idx += 1
        if idx == len(form):
            break
        if pos == n:
            pos = 0
            wraps += 1
            if wraps > max_wraps:
                return Rejected(WRAP_LIMIT_EXCEEDED, tuple(trace), _render(form))
        nt = form[idx].name
        alts = g.rules_for(nt)
        v = codons[pos]
        choice = v % len(alts)
        partial = _render(form) if derivations else ""
        trace.append(TraceStep(partial, nt, pos, v, len(alts), choice, wraps))
        form[idx : idx + 1] = alts[choice].rhs
        pos += 1

    text = _render(form)
    try:
        expression = parse_expression(text)
    except ExpressionSyntaxError:
        return Rejected(INVALID_EXPRESSION, tuple(trace), text)
    return Mapped(expression, text, tuple(trace))


def format_trace(trace: Sequence[TraceStep], codons: Sequence[int] | None = None) -> str:
    """Three-column table: partial string, remaining codons, operation.

    ``codons`` defaults to reconstructing the chromosome from the trace,
    which is exact unless the trace wrapped.
    """
    if codons is None:
        first_pass = {s.position: s.codon for s in trace}
        codons = [first_pass[i] for i in sorted(first_pass)]
    rows = [
        (s.derivation, ",".join(str(c) for c in codons[s.position :]), s.operation)
        for s in trace
    ]
    header = ("String_BNF", "Chromosome", "Operation")
    w0 = max([len(header[0])] + [len(r[0]) for r in rows])
    w1 = max([len(header[1])] + [len(r[1]) for r in rows])
    lines = [f"{header[0]:<{w0}}  {header[1]:<{w1}}  {header[2]}"]
    lines += [f"{a:<{w0}}  {b:<{w1}}  {c}" for a, b, c in rows]
    return "\n".join(lines)
