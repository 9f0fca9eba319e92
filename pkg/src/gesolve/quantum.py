"""1-D time-independent Schrodinger problems: Hamiltonian, residual fitness,
quadrature and a finite-difference eigensolver used as an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy.integrate import simpson
from scipy.linalg import eigh_tridiagonal

from .expr import (
    DomainError,
    Expression,
    RbfConfig,
    differentiate,
    evaluate,
    parse_expression,
    print_expression,
    variables,
)

__all__ = [
    "InfiniteWell",
    "Harmonic",
    "Custom",
    "ProblemSpec",
    "FitnessReport",
    "PRESETS",
    "preset",
    "collocation_points",
    "second_derivative",
    "apply_hamiltonian",
    "residual",
    "quadrature",
    "rayleigh_energy",
    "fitness",
    "Evaluator",
    "fd_ground_state",
    "fd_eigenpair",
]

NARROW_OMEGA = math.sqrt(20.0) * 1e2


@dataclass(frozen=True)
class InfiniteWell:
    kind = "infinite_well"

    def values(self, x, rbf: RbfConfig = RbfConfig()):
        return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Harmonic:
    omega: float = 1.0
    kind = "harmonic"

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("harmonic omega must be positive")

    def values(self, x, rbf: RbfConfig = RbfConfig()):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.omega**2 * x * x


@dataclass(frozen=True)
class Custom:
    expr: Expression
    kind = "custom"

    def __post_init__(self):
        if isinstance(self.expr, str):
            object.__setattr__(self, "expr", parse_expression(self.expr))
        extra = variables(self.expr) - {"x"}
        if extra:
            raise ValueError(f"potential may only use x, found {sorted(extra)}")

    def values(self, x, rbf: RbfConfig = RbfConfig()):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(evaluate(self.expr, {"x": x}, rbf), x.shape)


PotentialSpec = Union[InfiniteWell, Harmonic, Custom]


@dataclass(frozen=True)
class ProblemSpec:
    a: float = 0.0
    b: float = 1.0
    potential: PotentialSpec = field(default_factory=InfiniteWell)
    energy_mode: str = "fixed"  # "fixed" | "rayleigh"
    energy: float = math.pi**2 / 2
    hbar: float = 1.0
    mass: float = 1.0
    T: int = 100
    lambda_norm: float = 100.0
    mu_boundary: float = 100.0
    penalty_fitness: float = 1e10
    norm_convention: str = "psi_squared"  # "psi_squared" | "psi_literal"
    residual_mode: str = "squared"  # "squared" | "abs"
    quad_panels: int = 1000

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"domain needs a < b, got [{self.a}, {self.b}]")
        if self.T < 2:
            raise ValueError("T must be at least 2")
        if self.hbar <= 0 or self.mass <= 0:
            raise ValueError("hbar and mass must be positive")
        if self.lambda_norm < 0 or self.mu_boundary < 0:
            raise ValueError("penalty weights must be non-negative")
        if self.energy_mode not in ("fixed", "rayleigh"):
            raise ValueError(f"energy_mode must be fixed or rayleigh, not {self.energy_mode!r}")
        if self.norm_convention not in ("psi_squared", "psi_literal"):
            raise ValueError(f"unknown norm_convention {self.norm_convention!r}")
        if self.residual_mode not in ("squared", "abs"):
            raise ValueError(f"unknown residual_mode {self.residual_mode!r}")
        if self.quad_panels < 2 or self.quad_panels % 2:
            raise ValueError("quad_panels must be even and at least 2")

    @property
    def kinetic(self) -> float:
        return self.hbar**2 / (2.0 * self.mass)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "potential"}
        pot = self.potential
        d["potential"] = pot.kind
        if isinstance(pot, Harmonic):
            d["omega"] = pot.omega
        elif isinstance(pot, Custom):
            d["potential_expr"] = print_expression(pot.expr)
        return d


def preset(name: str, **overrides) -> ProblemSpec:
    """Bundled problems: ``box``, ``harmonic`` and ``harmonic-paper``."""
    if name == "box":
        base = dict(a=0.0, b=1.0, potential=InfiniteWell(), energy=math.pi**2 / 2)
    elif name == "harmonic":
        base = dict(a=-5.0, b=5.0, potential=Harmonic(1.0), energy=0.5)
    elif name == "harmonic-paper":
        base = dict(a=-0.5, b=0.5, potential=Harmonic(NARROW_OMEGA), energy=NARROW_OMEGA / 2)
    else:
        raise ValueError(f"unknown problem preset {name!r}")
    base.update(overrides)
    return ProblemSpec(**base)


PRESETS = ("box", "harmonic", "harmonic-paper")


@dataclass(frozen=True)
class FitnessReport:
    residual_sse: float
    norm_penalty: float
    boundary_penalty: float
    total: float
    energy_used: float
    valid: bool
    error: str | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def collocation_points(a: float, b: float, T: int) -> np.ndarray:
    """T equidistant points strictly inside (a, b)."""
    if not a < b:
        raise ValueError(f"collocation needs a < b, got [{a}, {b}]")
    if T < 1:
        raise ValueError("T must be positive")
    j = np.arange(1, T + 1, dtype=float)
    return a + j * (b - a) / (T + 1)


def second_derivative(psi: Expression, rbf: RbfConfig = RbfConfig()) -> Expression:
    return differentiate(differentiate(psi, "x", rbf), "x", rbf)


def _h_psi(psi, d2, p, x, rbf):
    psi_v = evaluate(psi, {"x": x}, rbf)
    d2_v = evaluate(d2, {"x": x}, rbf)
    v = p.potential.values(x, rbf)
    with np.errstate(all="ignore"):
        h = -p.kinetic * d2_v + v * psi_v
    if not np.all(np.isfinite(h)):
        raise DomainError("non-finite Hamiltonian value")
    return h, psi_v


def apply_hamiltonian(psi: Expression, p: ProblemSpec, x, rbf: RbfConfig = RbfConfig()):
    """-(hbar^2 / 2m) psi'' + V psi at ``x`` (scalar or array)."""
    h, _ = _h_psi(psi, second_derivative(psi, rbf), p, x, rbf)
    return float(h) if np.ndim(h) == 0 else h


def residual(psi: Expression, p: ProblemSpec, E: float, x, rbf: RbfConfig = RbfConfig()):
    h, psi_v = _h_psi(psi, second_derivative(psi, rbf), p, x, rbf)
    r = h - E * psi_v
    return float(r) if np.ndim(r) == 0 else r


def quadrature(f: Callable, a: float, b: float, n: int = 1000) -> float:
    """Composite Simpson rule with ``n`` (even) panels.

    ``f`` is called once with the array of nodes; non-finite values raise
    :class:`DomainError`.
    """
    if not a < b:
        raise ValueError("quadrature needs a < b")
    if n < 2 or n % 2:
        raise ValueError("panel count must be even and at least 2")
    x = np.linspace(a, b, n + 1)
    y = np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)
    if not np.all(np.isfinite(y)):
        raise DomainError("integrand is not finite at every node")
    return float(simpson(y, dx=(b - a) / n))


def _nodes(p):
    return np.linspace(p.a, p.b, p.quad_panels + 1)


def _rayleigh_from_values(p, psi_v, h_v):
    dx = (p.b - p.a) / p.quad_panels
    norm = float(simpson(psi_v * psi_v, dx=dx))
    if not norm > 1e-12:
        raise DomainError("trial function has (near) zero norm")
    return float(simpson(psi_v * h_v, dx=dx)) / norm


def rayleigh_energy(psi: Expression, p: ProblemSpec, rbf: RbfConfig = RbfConfig()) -> float:
    """Energy estimate <psi|H|psi> / <psi|psi> over [a, b]."""
    h, psi_v = _h_psi(psi, second_derivative(psi, rbf), p, _nodes(p), rbf)
    return _rayleigh_from_values(p, psi_v, h)


class Evaluator:
    """Fitness for one problem, with the sample grids built once."""

    def __init__(self, p: ProblemSpec, rbf: RbfConfig = RbfConfig()):
        self.problem = p
        self.rbf = rbf
        self.colloc = collocation_points(p.a, p.b, p.T)
        self.nodes = _nodes(p)
        self.dx = (p.b - p.a) / p.quad_panels
        self.v_colloc = p.potential.values(self.colloc, rbf)
        self.v_nodes = p.potential.values(self.nodes, rbf) if p.energy_mode == "rayleigh" else None

    def _invalid(self, msg, sse=0.0, energy=float("nan")):
        return FitnessReport(sse, 0.0, 0.0, self.problem.penalty_fitness, energy, False, msg)

    def __call__(self, psi: Expression) -> FitnessReport:
        p, rbf = self.problem, self.rbf
        E = p.energy if p.energy_mode == "fixed" else float("nan")
        sse = 0.0
        try:
            d2 = second_derivative(psi, rbf)
            if p.energy_mode == "rayleigh":
                h_n, psi_n = _h_psi(psi, d2, p, self.nodes, rbf)
                E = _rayleigh_from_values(p, psi_n, h_n)
            h, psi_c = _h_psi(psi, d2, p, self.colloc, rbf)
            with np.errstate(all="ignore"):
                r = h - E * psi_c
                sse = float(np.sum(r * r) if p.residual_mode == "squared" else np.sum(np.abs(r)))
            if not math.isfinite(sse):
                return self._invalid("residual overflow", float("inf"), E)
            psi_n = evaluate(psi, {"x": self.nodes}, rbf)
            with np.errstate(all="ignore"):
                integrand = psi_n * psi_n if p.norm_convention == "psi_squared" else psi_n
                q = float(simpson(integrand, dx=self.dx))
                norm_pen = p.lambda_norm * (q - 1.0) * (q - 1.0)
                if isinstance(p.potential, InfiniteWell):
                    bnd_pen = p.mu_boundary * float(psi_n[0] ** 2 + psi_n[-1] ** 2)
                else:
                    bnd_pen = 0.0
        except DomainError as exc:
            return self._invalid(str(exc), sse, E)
        total = sse + norm_pen + bnd_pen
        if not total < p.penalty_fitness:
            return self._invalid("total not below penalty_fitness", sse, E)
        return FitnessReport(sse, norm_pen, bnd_pen, total, E, True)


def fitness(psi: Expression, p: ProblemSpec, rbf: RbfConfig = RbfConfig()) -> FitnessReport:
    """Residual sum over collocation points plus normalization and wall penalties.

    Any evaluation failure yields ``valid=False`` and ``total=penalty_fitness``.
    """
    return Evaluator(p, rbf)(psi)


def fd_eigenpair(p: ProblemSpec, N: int = 2000, index: int = 0, rbf: RbfConfig = RbfConfig()):
    """Eigenpair ``index`` of the 3-point finite-difference Hamiltonian.

    N interior points with Dirichlet walls at a and b.  The eigenvector is
    normalized so that sum(psi^2) * h == 1 with a non-negative first lobe.
    """
    if N < 10:
        raise ValueError("finite-difference grid needs N >= 10")
    if not 0 <= index < N:
        raise ValueError("eigenvalue index out of range")
    h = (p.b - p.a) / (N + 1)
    x = p.a + h * np.arange(1, N + 1)
    v = p.potential.values(x, rbf)
    if not np.all(np.isfinite(v)):
        raise DomainError("potential is not finite on the interior grid")
    k = p.kinetic / h**2
    diag = 2.0 * k + v
    off = np.full(N - 1, -k)
    # LAPACK stebz: bisection on the Sturm sequence
    w, vec = eigh_tridiagonal(diag, off, select="i", select_range=(index, index), lapack_driver="stebz")
    if w.size != 1 or not np.isfinite(w[0]):
        raise RuntimeError("tridiagonal eigensolver did not converge")
    psi = vec[:, 0]
    psi = psi / math.sqrt(float(np.sum(psi * psi)) * h)
    first = psi[np.argmax(np.abs(psi) > 1e-8 * np.abs(psi).max())]
    if first < 0:
        psi = -psi
    return float(w[0]), psi


def fd_ground_state(p: ProblemSpec, N: int = 2000, rbf: RbfConfig = RbfConfig()):
    return fd_eigenpair(p, N, 0, rbf)
