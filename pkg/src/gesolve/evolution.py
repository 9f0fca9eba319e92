"""Grammatical evolution of trial wavefunctions."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .expr import RbfConfig
from .grammar import Grammar
from .mapper import Mapped, MappingOutcome, Rejected, TraceStep, map_genotype
from .quantum import Evaluator, FitnessReport, ProblemSpec

__all__ = [
    "EvolutionConfig",
    "Individual",
    "GenerationStats",
    "RunReport",
    "init_population",
    "tournament_select",
    "similarity_length",
    "homologous_crossover",
    "invert_segment",
    "inversion_mutation",
    "update_pc",
    "evolve",
]

log = logging.getLogger(__name__)

# logit clamp keeps the adaptive probability strictly inside (0, 1) in float64
_LOGIT_LIMIT = 30.0


@dataclass(frozen=True)
class EvolutionConfig:
    population_size: int = 200
    chromosome_length: int = 50
    codon_max: int = 255
    init_mode: str = "random"  # "random" | "permutation"
    tournament_size: int = 4
    pc0: float = 0.9
    gamma: float = 0.5
    pc_form: str = "standard"  # "standard" | "paper_literal"
    max_generations: int = 1000
    fitness_tolerance: float = 1e-8
    max_wraps: int = 2
    elitism_count: int = 1
    crossover_retries: int = 3
    rng_seed: int = 0
    threads: int = 1

    def __post_init__(self):
        checks = [
            (self.population_size >= 2, "population_size", "must be at least 2"),
            (self.chromosome_length >= 1, "chromosome_length", "must be at least 1"),
            (self.codon_max >= 1, "codon_max", "must be at least 1"),
            (self.init_mode in ("random", "permutation"), "init_mode", "must be random or permutation"),
            (
                2 <= self.tournament_size <= self.population_size,
                "tournament_size",
                "must be in [2, population_size]",
            ),
            (0.0 < self.pc0 < 1.0, "pc0", "must be in (0, 1)"),
            (self.gamma > 0, "gamma", "must be positive"),
            (self.pc_form in ("standard", "paper_literal"), "pc_form", "must be standard or paper_literal"),
            (self.max_generations >= 0, "max_generations", "must be non-negative"),
            (self.max_wraps >= 0, "max_wraps", "must be non-negative"),
            (0 <= self.elitism_count < self.population_size, "elitism_count", "must be in [0, population_size)"),
            (self.crossover_retries >= 0, "crossover_retries", "must be non-negative"),
            (self.threads >= 1, "threads", "must be at least 1"),
        ]
        if self.init_mode == "permutation":
            checks.append(
                (self.chromosome_length <= self.codon_max, "codon_max", "must be >= chromosome_length for permutation init")
            )
        for ok, key, msg in checks:
            if not ok:
                raise ConfigError(key, msg)


class ConfigError(ValueError):
    def __init__(self, key: str, msg: str):
        super().__init__(f"{key}: {msg}")
        self.key = key


@dataclass
class Individual:
    codons: tuple[int, ...]
    outcome: MappingOutcome | None = None
    report: FitnessReport | None = None

    @property
    def total(self) -> float:
        if self.report is None:
            raise ValueError("individual has not been evaluated")
        return self.report.total

    @property
    def phenotype_text(self) -> str | None:
        return self.outcome.text if isinstance(self.outcome, Mapped) else None

    @property
    def trace(self) -> tuple[TraceStep, ...]:
        return self.outcome.trace if self.outcome is not None else ()


@dataclass(frozen=True)
class GenerationStats:
    t: int
    best_total: float
    mean_total: float
    worst_total: float
    best_expression: str
    pc: float
    invalid_count: int


@dataclass
class RunReport:
    config: dict
    stats: list[GenerationStats]
    best: Individual
    termination: str  # "max_generations" | "tolerance_reached"
    wall_time: float

    def to_dict(self) -> dict:
        best = self.best
        return {
            "config": self.config,
            "termination": self.termination,
            "generations": len(self.stats) - 1,
            "wall_time": self.wall_time,
            "best": {
                "codons": list(best.codons),
                "expression": best.phenotype_text,
                "mapping": "mapped" if isinstance(best.outcome, Mapped) else getattr(best.outcome, "reason", None),
                "fitness": best.report.to_dict() if best.report else None,
            },
        }


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


def init_population(cfg: EvolutionConfig, rng: np.random.Generator) -> list[Individual]:
    n, L = cfg.population_size, cfg.chromosome_length
    if cfg.init_mode == "permutation":
        rows = [rng.permutation(L) + 1 for _ in range(n)]
    else:
        rows = rng.integers(0, cfg.codon_max + 1, size=(n, L))
    return [Individual(tuple(int(c) for c in row)) for row in rows]


def tournament_select(totals: Sequence[float], k: int, rng: np.random.Generator) -> int:
    """Index of the lowest total among ``k`` distinct random competitors."""
    totals = np.asarray(totals, dtype=float)
    n = totals.size
    if not 2 <= k <= n:
        raise ValueError(f"tournament size {k} out of range for population {n}")
    drawn = rng.choice(n, size=k, replace=False)
    return int(drawn[np.argmin(totals[drawn])])


def _first_pass(trace):
    return [s for s in trace if s.wraps == 0]


def similarity_length(trace1: Sequence[TraceStep], trace2: Sequence[TraceStep]) -> int:
    """Number of leading steps where both parents rewrite the same
    nonterminal with the same rule."""
    n = 0
    for s1, s2 in zip(_first_pass(trace1), _first_pass(trace2)):
        if s1.nonterminal != s2.nonterminal or s1.choice != s2.choice:
            break
        n += 1
    return n


def _fit_length(codons, cfg, rng):
    L = cfg.chromosome_length
    if len(codons) >= L:
        return tuple(codons[:L])
    pad = rng.integers(0, cfg.codon_max + 1, size=L - len(codons))
    return tuple(codons) + tuple(int(c) for c in pad)


def homologous_crossover(
    p1: Individual, p2: Individual, g: Grammar, cfg: EvolutionConfig, rng: np.random.Generator
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Two-point crossover with the first cut inside the shared derivation
    prefix and second cuts aligned on the same nonterminal."""
    c1, c2 = p1.codons, p2.codons
    if p1.outcome is None:
        p1.outcome = map_genotype(g, c1, cfg.max_wraps, derivations=False)
    if p2.outcome is None:
        p2.outcome = map_genotype(g, c2, cfg.max_wraps, derivations=False)
    t1, t2 = _first_pass(p1.trace), _first_pass(p2.trace)
    s = similarity_length(t1, t2)
    d1, d2 = t1[s:], t2[s:]
    if not d1 or not d2:
        return c1, c2
    for _ in range(1 + cfg.crossover_retries):
        first = int(rng.integers(0, s + 1))
        step1 = d1[int(rng.integers(len(d1)))]
        start = int(rng.integers(len(d2)))
        for off in range(len(d2)):
            step2 = d2[(start + off) % len(d2)]
            if step2.nonterminal == step1.nonterminal:
                cut1, cut2 = step1.position, step2.position
                child1 = c1[:first] + c2[first:cut2] + c1[cut1:]
                child2 = c2[:first] + c1[first:cut1] + c2[cut2:]
                return _fit_length(child1, cfg, rng), _fit_length(child2, cfg, rng)
    return c1, c2


def invert_segment(codons: Sequence[int], start: int, stop: int, insert_at: int) -> tuple[int, ...]:
    """Remove ``codons[start:stop]`` and reinsert it reversed at
    ``insert_at`` in the remainder."""
    codons = tuple(codons)
    segment = codons[start:stop][::-1]
    rest = codons[:start] + codons[stop:]
    return rest[:insert_at] + segment + rest[insert_at:]


def inversion_mutation(codons: Sequence[int], rng: np.random.Generator) -> tuple[int, ...]:
    n = len(codons)
    start = int(rng.integers(0, n))
    stop = int(rng.integers(start + 1, n + 1))
    insert_at = int(rng.integers(0, n - (stop - start) + 1))
    return invert_segment(codons, start, stop, insert_at)


def update_pc(pc: float, gamma: float, rng: np.random.Generator, form: str = "standard", z: float | None = None) -> float:
    """Logistic-normal step of the crossover probability.

    standard:      pc' = 1 / (1 + (1-pc)/pc * exp(-gamma z))
    paper_literal: pc' = 1 - that
    """
    if not 0.0 < pc < 1.0:
        raise ValueError("pc must lie in (0, 1)")
    if z is None:
        z = float(rng.standard_normal())
    logit = math.log(pc) - math.log1p(-pc) + gamma * z
    if form == "paper_literal":
        logit = -logit
    elif form != "standard":
        raise ValueError(f"unknown pc form {form!r}")
    logit = min(max(logit, -_LOGIT_LIMIT), _LOGIT_LIMIT)
    return 1.0 / (1.0 + math.exp(-logit))


# ---------------------------------------------------------------------------
# main loop
# ---------------------------------------------------------------------------


class _Scorer:
    """Maps and scores individuals; phenotypes are scored once per run."""

    def __init__(self, problem, g, cfg, rbf):
        self.g = g
        self.cfg = cfg
        self.evaluator = Evaluator(problem, rbf)
        self.penalty = problem.penalty_fitness
        self.cache: dict[str, FitnessReport] = {}

    def _rejected(self, reason):
        return FitnessReport(0.0, 0.0, 0.0, self.penalty, float("nan"), False, reason)

    def score(self, individuals: list[Individual], pool: ThreadPoolExecutor | None):
        todo = {}
        for ind in individuals:
            if ind.report is not None:
                continue
            if ind.outcome is None:
                ind.outcome = map_genotype(self.g, ind.codons, self.cfg.max_wraps, derivations=False)
            if isinstance(ind.outcome, Rejected):
                ind.report = self._rejected(ind.outcome.reason)
            elif ind.outcome.text not in self.cache:
                todo.setdefault(ind.outcome.text, ind.outcome.expression)
        texts = list(todo)
        exprs = [todo[t] for t in texts]
        results = pool.map(self.evaluator, exprs) if pool else map(self.evaluator, exprs)
        for text, rep in zip(texts, results):
            self.cache[text] = rep
        for ind in individuals:
            if ind.report is None:
                ind.report = self.cache[ind.outcome.text]


def _stats(t, pop, pc, penalty):
    totals = np.array([ind.total for ind in pop])
    valid = np.array([ind.report.valid for ind in pop])
    best = int(np.argmin(totals))
    vt = totals[valid] if valid.any() else np.array([penalty])
    return GenerationStats(
        t=t,
        best_total=float(totals[best]),
        mean_total=float(vt.mean()),
        worst_total=float(vt.max()),
        best_expression=pop[best].phenotype_text or "",
        pc=pc,
        invalid_count=int((~valid).sum()),
    )


def evolve(
    problem: ProblemSpec,
    g: Grammar,
    cfg: EvolutionConfig = EvolutionConfig(),
    rbf: RbfConfig = RbfConfig(),
    initial: Sequence[Sequence[int]] = (),
    config_echo: dict | None = None,
    callback: Callable[[GenerationStats], None] | None = None,
) -> RunReport:
    """Run the generational loop until ``max_generations`` or until the best
    total drops to ``fitness_tolerance``.

    ``initial`` chromosomes replace the first members of the random initial
    population.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.rng_seed)
    scorer = _Scorer(problem, g, cfg, rbf)
    pop = init_population(cfg, rng)
    for i, codons in enumerate(initial):
        pop[i] = Individual(tuple(int(c) for c in codons))
    pc = cfg.pc0
    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    stats = []
    try:
        scorer.score(pop, pool)
        stats.append(_stats(0, pop, pc, problem.penalty_fitness))
        if callback:
            callback(stats[-1])
        for t in range(1, cfg.max_generations + 1):
            if stats[-1].best_total <= cfg.fitness_tolerance:
                break
            pop = _next_generation(pop, g, cfg, pc, rng)
            scorer.score(pop, pool)
            stats.append(_stats(t, pop, pc, problem.penalty_fitness))
            pc = update_pc(pc, cfg.gamma, rng, cfg.pc_form)
            if callback:
                callback(stats[-1])
    finally:
        if pool:
            pool.shutdown()

    best = min(pop, key=lambda ind: ind.total)
    termination = "tolerance_reached" if best.total <= cfg.fitness_tolerance else "max_generations"
    echo = config_echo if config_echo is not None else {
        "problem": problem.to_dict(),
        "evolution": asdict(cfg),
        "rbf": asdict(rbf),
    }
    return RunReport(echo, stats, best, termination, time.perf_counter() - t0)


def _next_generation(pop, g, cfg, pc, rng):
    totals = np.array([ind.total for ind in pop])
    order = np.argsort(totals, kind="stable")
    nxt = [pop[i] for i in order[: cfg.elitism_count]]
    pm = 1.0 - pc
    while len(nxt) < cfg.population_size:
        a = pop[tournament_select(totals, cfg.tournament_size, rng)]
        b = pop[tournament_select(totals, cfg.tournament_size, rng)]
        if rng.random() < pc:
            children = homologous_crossover(a, b, g, cfg, rng)
            kids = [
                Individual(c) if c != p.codons else p for c, p in zip(children, (a, b))
            ]
        else:
            kids = [a, b]
        for kid in kids:
            if rng.random() < pm:
                kid = Individual(inversion_mutation(kid.codons, rng))
            elif kid is a or kid is b:
                # clone keeps the parent's mapping and score
                kid = Individual(kid.codons, kid.outcome, kid.report)
            if len(nxt) < cfg.population_size:
                nxt.append(kid)
    return nxt
