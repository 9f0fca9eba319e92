"""BNF grammars: parsing, validation, serialization and the built-in grammar.

Source format, one definition per line::

    <expr> ::= <expr> <op> <expr> (0)
             | (<expr>) (1)
    <op>   ::= + | - | * | /

Alternatives may continue on following lines that start with ``|``.  A
trailing ``(n)`` separated by whitespace is a sequence number; it is checked
against the computed alternative index and otherwise ignored.  A bare
``S ::= <name>`` line declares the start symbol; without one, the first
defined nonterminal is the start.  Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

__all__ = [
    "GrammarError",
    "GrammarSymbol",
    "ProductionRule",
    "Grammar",
    "parse_grammar",
    "rules_for",
    "builtin_grammar",
    "grammar_to_bnf",
    "XYZ_GRAMMAR_BNF",
]


class GrammarError(ValueError):
    """Raised for malformed or inconsistent grammar sources."""


@dataclass(frozen=True)
class GrammarSymbol:
    kind: str  # "terminal" | "nonterminal"
    name: str

    def __post_init__(self):
        if self.kind not in ("terminal", "nonterminal"):
            raise GrammarError(f"bad symbol kind {self.kind!r}")
        if not self.name:
            raise GrammarError("symbol name must be non-empty")
        if self.kind == "terminal" and ("<" in self.name or ">" in self.name):
            raise GrammarError(f"terminal {self.name!r} contains angle brackets")

    @property
    def is_nonterminal(self) -> bool:
        return self.kind == "nonterminal"

    def __str__(self) -> str:
        return f"<{self.name}>" if self.is_nonterminal else self.name


@dataclass(frozen=True)
class ProductionRule:
    lhs: str
    rhs: tuple[GrammarSymbol, ...]
    index: int

    def __post_init__(self):
        if not self.rhs:
            raise GrammarError(f"empty right-hand side for <{self.lhs}>")

    @property
    def text(self) -> str:
        return "".join(str(s) for s in self.rhs)


@dataclass(frozen=True)
class Grammar:
    rules: Mapping[str, tuple[ProductionRule, ...]]
    start: str
    nonterminals: frozenset[str] = field(init=False)
    terminals: frozenset[str] = field(init=False)

    def __post_init__(self):
        rules = MappingProxyType({k: tuple(v) for k, v in self.rules.items()})
        object.__setattr__(self, "rules", rules)
        object.__setattr__(self, "nonterminals", frozenset(rules))
        terminals = {
            s.name
            for alts in rules.values()
            for r in alts
            for s in r.rhs
            if not s.is_nonterminal
        }
        object.__setattr__(self, "terminals", frozenset(terminals))
        self._validate()

    def _validate(self):
        if self.start not in self.rules:
            raise GrammarError(f"start symbol <{self.start}> has no rules")
        for lhs, alts in self.rules.items():
            if not alts:
                raise GrammarError(f"<{lhs}> has no alternatives")
            for i, rule in enumerate(alts):
                if rule.index != i or rule.lhs != lhs:
                    raise GrammarError(f"non-dense rule indices for <{lhs}>")
                for s in rule.rhs:
                    if s.is_nonterminal and s.name not in self.rules:
                        raise GrammarError(
                            f"undefined nonterminal <{s.name}> referenced in <{lhs}>"
                        )

    def rules_for(self, nt: str) -> tuple[ProductionRule, ...]:
        try:
            return self.rules[nt]
        except KeyError:
            raise GrammarError(f"unknown nonterminal <{nt}>") from None

    def structure(self) -> tuple:
        """Hashable structural summary used for equality checks."""
        return (
            self.start,
            tuple(sorted((k, tuple(r.rhs for r in v)) for k, v in self.rules.items())),
        )


def rules_for(g: Grammar, nt: str) -> tuple[ProductionRule, ...]:
    return g.rules_for(nt)


_DEF_RE = re.compile(r"^\s*(<[^<>\s]+>|S)\s*::=(.*)$")
_SEQNO_RE = re.compile(r"^(.*?)\s+\((\d+)\)\s*$")
_TOKEN_RE = re.compile(
    r"""
    (?P<nt><[^<>\s]+>)
  | "(?P<dq>[^"]*)"
  | '(?P<sq>[^']*)'
  | (?P<word>[A-Za-z0-9_.]+)
  | (?P<punct>[^\s<>])
    """,
    re.VERBOSE,
)


def _tokenize_alternative(text: str, lineno: int) -> tuple[list[GrammarSymbol], int | None]:
    seqno = None
    m = _SEQNO_RE.match(text)
    if m:
        text, seqno = m.group(1), int(m.group(2))
    symbols = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise GrammarError(f"line {lineno}: cannot tokenize {text[pos:]!r}")
        if m.group("nt"):
            symbols.append(GrammarSymbol("nonterminal", m.group("nt")[1:-1]))
        else:
            name = next(g for g in (m.group("dq"), m.group("sq"), m.group("word"), m.group("punct")) if g is not None)
            symbols.append(GrammarSymbol("terminal", name))
        pos = m.end()
    if not symbols:
        raise GrammarError(f"line {lineno}: empty alternative")
    return symbols, seqno


def _split_alternatives(body: str) -> list[str]:
    # "|" inside quotes is a terminal, not a separator
    parts, buf, quote = [], [], None
    for ch in body:
        if quote:
            buf.append(ch)
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
            buf.append(ch)
        elif ch == "|":
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    parts.append("".join(buf))
    return parts


def parse_grammar(text: str) -> Grammar:
    """Parse BNF source text into a validated :class:`Grammar`."""
    if not text or not text.strip():
        raise GrammarError("empty grammar source")

    rules: dict[str, list[ProductionRule]] = {}
    start = None
    current = None

    def add(lhs: str, alt: str, lineno: int):
        symbols, seqno = _tokenize_alternative(alt, lineno)
        alts = rules.setdefault(lhs, [])
        if seqno is not None and seqno != len(alts):
            raise GrammarError(
                f"line {lineno}: sequence number ({seqno}) for <{lhs}> "
                f"does not match position {len(alts)}"
            )
        alts.append(ProductionRule(lhs, tuple(symbols), len(alts)))

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _DEF_RE.match(line)
        if m:
            lhs, body = m.group(1), m.group(2)
            if lhs == "S":
                symbols, seqno = _tokenize_alternative(body, lineno)
                if len(symbols) != 1 or not symbols[0].is_nonterminal or seqno not in (None, 0):
                    raise GrammarError(f"line {lineno}: start declaration must be 'S ::= <name>'")
                start = symbols[0].name
                current = None
                continue
            current = lhs[1:-1]
            chunks = _split_alternatives(body)
        elif line.startswith("|"):
            if current is None:
                raise GrammarError(f"line {lineno}: continuation without a rule")
            chunks = _split_alternatives(line[1:])
        else:
            raise GrammarError(f"line {lineno}: malformed rule line {line!r}")
        for chunk in chunks:
            add(current, chunk, lineno)

    if not rules:
        raise GrammarError("grammar defines no rules")
    if start is None:
        start = next(iter(rules))
    return Grammar(rules, start)


def grammar_to_bnf(g: Grammar) -> str:
    """Serialize back to source text accepted by :func:`parse_grammar`."""

    def sym(s: GrammarSymbol) -> str:
        if s.is_nonterminal:
            return f"<{s.name}>"
        if s.name == "|" or not re.fullmatch(r"[A-Za-z0-9_.]+|[^\s<>\"']", s.name):
            return f'"{s.name}"' if '"' not in s.name else f"'{s.name}'"
        return s.name

    lines = [f"S ::= <{g.start}>"]
    for lhs, alts in g.rules.items():
        for r in alts:
            head = f"<{lhs}> ::=" if r.index == 0 else "    |"
            lines.append(f"{head} {' '.join(sym(s) for s in r.rhs)} ({r.index})")
    return "\n".join(lines) + "\n"


XYZ_GRAMMAR_BNF = """\
S ::= <expr> (0)
<expr> ::= <expr> <op> <expr> (0)
    | (<expr>) (1)
    | <func> (<expr>) (2)
    | <operand> (3)
<op> ::= + (0)
    | - (1)
    | * (2)
    | / (3)
<func> ::= sin (0)
    | cos (1)
    | exp (2)
    | log (3)
    | sqrt (4)
    | BRF1 (5)
    | BRF2 (6)
    | BRF3 (7)
    | BRF4 (8)
<operand> ::= 0 (0)
    | 1 (1)
    | 2 (2)
    | 3 (3)
    | 4 (4)
    | 5 (5)
    | 6 (6)
    | 7 (7)
    | 8 (8)
    | 9 (9)
    | <var> (10)
<var> ::= x (0)
    | y (1)
    | z (2)
"""

X_ONLY_GRAMMAR_BNF = XYZ_GRAMMAR_BNF.replace(
    "<var> ::= x (0)\n    | y (1)\n    | z (2)\n", "<var> ::= x (0)\n"
)

_BUILTINS = {}


def builtin_grammar(variant: str = "x_only") -> Grammar:
    """Return the built-in grammar: ``xyz`` (x, y, z) or ``x_only``."""
    if variant not in ("xyz", "x_only"):
        raise GrammarError(f"unknown builtin grammar variant {variant!r}")
    if variant not in _BUILTINS:
        src = XYZ_GRAMMAR_BNF if variant == "xyz" else X_ONLY_GRAMMAR_BNF
        _BUILTINS[variant] = parse_grammar(src)
    return _BUILTINS[variant]
