"""Run configuration documents (JSON) and their resolution into objects.

A document has up to four top-level keys::

    {"problem": {...}, "evolution": {...}, "rbf": {"c": 1.0}, "grammar": null}

Every key is optional.  ``problem.preset`` picks one of the bundled problems
and the remaining problem keys override it.  A ``report.json`` written by
``solve`` is accepted as well; its ``config`` member is used.
"""

from __future__ import annotations

import json
from dataclasses import asdict, fields
from pathlib import Path

from .evolution import ConfigError, EvolutionConfig
from .expr import ExpressionSyntaxError, RbfConfig, parse_expression
from .grammar import Grammar, builtin_grammar, parse_grammar
from .quantum import Custom, Harmonic, InfiniteWell, ProblemSpec, preset

__all__ = ["ConfigError", "RunConfig", "load_config_file", "resolve"]

TOP_KEYS = {"problem", "evolution", "rbf", "grammar"}
PROBLEM_KEYS = {f.name for f in fields(ProblemSpec)} - {"potential"} | {
    "preset",
    "potential",
    "omega",
    "potential_expr",
}
EVOLUTION_KEYS = {f.name for f in fields(EvolutionConfig)}
RBF_KEYS = {"c"}
POTENTIALS = ("infinite_well", "harmonic", "custom")


def _check_keys(section: dict, allowed: set, where: str):
    if not isinstance(section, dict):
        raise ConfigError(where, "must be an object")
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{where}.{key}" if where else key, "unknown key")


def load_config_file(path: str | Path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"{path} is not valid JSON: {exc}") from None
    if isinstance(doc, dict) and "config" in doc and "stats" not in doc and "best" in doc:
        doc = doc["config"]
    validate_document(doc)
    return doc


def validate_document(doc: dict):
    _check_keys(doc, TOP_KEYS, "")
    _check_keys(doc.get("problem", {}), PROBLEM_KEYS, "problem")
    _check_keys(doc.get("evolution", {}), EVOLUTION_KEYS, "evolution")
    _check_keys(doc.get("rbf", {}), RBF_KEYS, "rbf")


def merge(base: dict, override: dict) -> dict:
    out = {k: dict(v) if isinstance(v, dict) else v for k, v in base.items()}
    for k, v in override.items():
        if isinstance(v, dict):
            out.setdefault(k, {})
            out[k].update(v)
        else:
            out[k] = v
    return out


def problem_from_dict(d: dict) -> ProblemSpec:
    d = dict(d)
    name = d.pop("preset", None)
    base = preset(name).to_dict() if name else ProblemSpec().to_dict()
    explicit_potential = "potential" in d
    base.update(d)
    kind = base.pop("potential")
    omega = base.pop("omega", None)
    expr = base.pop("potential_expr", None)
    if expr is not None and not explicit_potential:
        kind = "custom"
    if kind == "infinite_well":
        pot = InfiniteWell()
    elif kind == "harmonic":
        pot = Harmonic(1.0 if omega is None else float(omega))
    elif kind == "custom":
        if expr is None:
            raise ConfigError("problem.potential_expr", "required for a custom potential")
        try:
            pot = Custom(parse_expression(expr))
        except (ExpressionSyntaxError, ValueError) as exc:
            raise ConfigError("problem.potential_expr", str(exc)) from None
    else:
        raise ConfigError("problem.potential", f"must be one of {POTENTIALS}")
    try:
        return ProblemSpec(potential=pot, **base)
    except (TypeError, ValueError) as exc:
        raise ConfigError("problem", str(exc)) from None


class RunConfig:
    """Fully resolved configuration plus the document that produced it."""

    def __init__(self, problem: ProblemSpec, evolution: EvolutionConfig, rbf: RbfConfig, grammar_path, grammar):
        self.problem = problem
        self.evolution = evolution
        self.rbf = rbf
        self.grammar_path = grammar_path
        self.grammar: Grammar = grammar

    def echo(self) -> dict:
        return {
            "problem": self.problem.to_dict(),
            "evolution": asdict(self.evolution),
            "rbf": asdict(self.rbf),
            "grammar": self.grammar_path,
        }


def load_grammar(path, default_variant="x_only") -> Grammar:
    if path is None:
        return builtin_grammar(default_variant)
    if path in ("builtin:xyz", "builtin:x_only"):
        return builtin_grammar(path.split(":", 1)[1])
    try:
        return parse_grammar(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError("grammar", f"cannot read {path}: {exc}") from None


def resolve(doc: dict) -> RunConfig:
    validate_document(doc)
    problem = problem_from_dict(doc.get("problem", {}))
    evo = doc.get("evolution", {})
    try:
        evolution = EvolutionConfig(**evo)
    except TypeError as exc:
        raise ConfigError("evolution", str(exc)) from None
    try:
        rbf = RbfConfig(**doc.get("rbf", {}))
    except ValueError as exc:
        raise ConfigError("rbf.c", str(exc)) from None
    path = doc.get("grammar")
    return RunConfig(problem, evolution, rbf, path, load_grammar(path))
