"""Grammatical evolution of closed-form solutions to 1-D Schrodinger problems."""

from .evolution import EvolutionConfig, RunReport, evolve
from .expr import RbfConfig, evaluate, parse_expression, print_expression
from .grammar import builtin_grammar, parse_grammar
from .mapper import map_genotype
from .quantum import ProblemSpec, fd_ground_state, fitness, preset

__version__ = "0.1.0"
