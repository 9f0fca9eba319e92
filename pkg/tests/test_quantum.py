import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gesolve.expr import Binary, Const, DomainError, Unary, Var, parse_expression
from gesolve.quantum import (
    NARROW_OMEGA,
    Custom,
    FitnessReport,
    Harmonic,
    InfiniteWell,
    ProblemSpec,
    apply_hamiltonian,
    collocation_points,
    fd_eigenpair,
    fd_ground_state,
    fitness,
    preset,
    quadrature,
    rayleigh_energy,
    residual,
)

PI = math.pi
X = Var("x")
SIN_PI_X = Unary("sin", Binary("*", Const(PI), X))
GAUSS = Unary("exp", Binary("/", Binary("-", Const(0), Binary("*", X, X)), Const(2)))


def normalized(e, scale):
    return Binary("*", Const(scale), e)


def test_collocation_points():
    assert collocation_points(0, 1, 3).tolist() == [0.25, 0.5, 0.75]
    pts = collocation_points(0, 1, 100)
    assert len(pts) == 100
    assert pts.min() == pytest.approx(1 / 101, abs=1e-15)
    assert pts.max() == pytest.approx(100 / 101, abs=1e-15)
    assert np.allclose(np.diff(pts), 1 / 101)
    with pytest.raises(ValueError):
        collocation_points(1, 0, 5)


def test_apply_hamiltonian_examples():
    box = preset("box")
    assert apply_hamiltonian(SIN_PI_X, box, 0.5) == pytest.approx(PI**2 / 2, rel=1e-14)
    h = preset("harmonic")
    for x in (-2.0, 0.0, 0.3, 1.7):
        psi = math.exp(-x * x / 2)
        assert apply_hamiltonian(GAUSS, h, x) == pytest.approx(0.5 * psi, rel=1e-12, abs=1e-15)
    for x in (0.1, 0.5, 0.9):
        assert apply_hamiltonian(Const(1), box, x) == 0.0


def test_kinetic_coefficient_uses_hbar_squared():
    p = ProblemSpec(hbar=2.0, mass=1.0)
    # -(4/2) * (-pi^2 sin) at 0.5
    assert apply_hamiltonian(SIN_PI_X, p, 0.5) == pytest.approx(2 * PI**2, rel=1e-14)


def test_residual_examples():
    box = preset("box")
    xs = collocation_points(0, 1, 100)
    assert np.max(np.abs(residual(SIN_PI_X, box, PI**2 / 2, xs))) <= 1e-10
    h = preset("harmonic")
    xs_h = collocation_points(-5, 5, 100)
    assert np.max(np.abs(residual(GAUSS, h, 0.5, xs_h))) <= 1e-10
    assert residual(Const(1), box, PI**2 / 2, 0.3) == pytest.approx(-PI**2 / 2, rel=1e-15)


def test_residual_propagates_domain_error():
    with pytest.raises(DomainError):
        residual(parse_expression("log(x-2)"), preset("box"), 1.0, 0.5)


def test_quadrature_examples():
    assert quadrature(lambda x: np.ones_like(x), 0, 1) == pytest.approx(1.0, abs=1e-15)
    assert quadrature(lambda x: np.sin(PI * x) ** 2, 0, 1) == pytest.approx(0.5, abs=1e-10)
    assert quadrature(lambda x: x, 0, 1) == pytest.approx(0.5, abs=1e-15)
    # Simpson is exact for cubics even with two panels
    assert quadrature(lambda x: x**3, 0, 2, n=2) == pytest.approx(4.0, abs=1e-14)


def test_quadrature_errors():
    with pytest.raises(ValueError):
        quadrature(lambda x: x, 0, 1, n=3)
    with pytest.raises(ValueError):
        quadrature(lambda x: x, 1, 0)
    with pytest.raises(DomainError), np.errstate(divide="ignore"):
        quadrature(lambda x: 1 / x, 0, 1)


def test_rayleigh_energy_examples():
    assert rayleigh_energy(SIN_PI_X, preset("box")) == pytest.approx(PI**2 / 2, abs=1e-6)
    assert rayleigh_energy(GAUSS, preset("harmonic")) == pytest.approx(0.5, abs=1e-6)
    assert rayleigh_energy(Const(1), preset("box")) == 0.0
    with pytest.raises(DomainError):
        rayleigh_energy(Const(0), preset("box"))


def test_fitness_of_exact_normalized_eigenfunction():
    rep = fitness(normalized(SIN_PI_X, math.sqrt(2)), preset("box"))
    assert rep.valid
    assert rep.residual_sse <= 1e-18
    assert rep.norm_penalty <= 1e-9
    assert rep.boundary_penalty <= 1e-20
    assert rep.total == pytest.approx(0, abs=1e-9)


def test_fitness_of_constant_on_box():
    rep = fitness(Const(1), preset("box"))
    # residual is -E at all 100 points; integral of 1^2 is 1; walls see psi = 1
    assert rep.residual_sse == pytest.approx(100 * (PI**2 / 2) ** 2, rel=1e-12)
    assert rep.residual_sse == pytest.approx(2435.2, abs=0.05)
    assert rep.norm_penalty == pytest.approx(0, abs=1e-20)
    assert rep.boundary_penalty == 200.0
    assert rep.total == rep.residual_sse + rep.norm_penalty + rep.boundary_penalty


def test_fitness_domain_error_is_penalty():
    rep = fitness(parse_expression("log(x-2)"), preset("box"))
    assert not rep.valid
    assert rep.total == 1e10


def test_one_over_x_on_box():
    # collocation never touches 0, so the residual is finite and huge; the
    # normalization integral does touch the wall, so the total is the penalty
    rep = fitness(parse_expression("1/x"), preset("box"))
    assert math.isfinite(rep.total)
    assert rep.residual_sse > 1e6
    assert rep.total == 1e10 and not rep.valid


def test_huge_valid_total_compares_above_nothing():
    # a finite total at or above the penalty is folded into the penalty
    rep = fitness(parse_expression("exp(9*x)*9*9*9*9"), preset("box"))
    assert rep.total <= 1e10
    assert rep.valid == (rep.total < 1e10)


def test_psi_literal_convention():
    p = preset("box", norm_convention="psi_literal")
    # integral of sin(pi x) on [0,1] is 2/pi
    rep = fitness(SIN_PI_X, p)
    assert rep.norm_penalty == pytest.approx(100 * (2 / PI - 1) ** 2, rel=1e-9)


def test_abs_residual_mode():
    rep = fitness(Const(1), preset("box", residual_mode="abs"))
    assert rep.residual_sse == pytest.approx(100 * PI**2 / 2, rel=1e-12)


def test_rayleigh_mode_fitness():
    rep = fitness(normalized(SIN_PI_X, math.sqrt(2)), preset("box", energy_mode="rayleigh"))
    assert rep.energy_used == pytest.approx(PI**2 / 2, abs=1e-6)
    assert rep.residual_sse < 1e-8


def test_harmonic_boundary_penalty_is_zero():
    rep = fitness(Const(1), preset("harmonic"))
    assert rep.boundary_penalty == 0.0


def test_custom_potential():
    p = ProblemSpec(a=-5, b=5, potential=Custom("x*x/2"), energy=0.5)
    assert np.max(np.abs(residual(GAUSS, p, 0.5, collocation_points(-5, 5, 20)))) < 1e-12
    with pytest.raises(ValueError):
        Custom("y*x")


def test_problem_validation():
    with pytest.raises(ValueError):
        ProblemSpec(a=1, b=0)
    with pytest.raises(ValueError):
        ProblemSpec(T=1)
    with pytest.raises(ValueError):
        ProblemSpec(lambda_norm=-1)
    with pytest.raises(ValueError):
        Harmonic(0)
    with pytest.raises(ValueError):
        preset("nope")


def test_presets():
    assert preset("box").energy == pytest.approx(PI**2 / 2)
    hp = preset("harmonic-paper")
    assert hp.potential.omega == pytest.approx(447.2136, abs=1e-4)
    assert NARROW_OMEGA == pytest.approx(math.sqrt(20) * 100)
    assert hp.energy == pytest.approx(hp.potential.omega / 2)


# finite-difference oracle -------------------------------------------------


def test_fd_box_ground_state():
    E0, psi = fd_ground_state(preset("box"), 2000)
    assert abs(E0 - PI**2 / 2) < 1e-3
    h = 1 / 2001
    assert np.sum(psi**2) * h == pytest.approx(1.0, rel=1e-12)
    x = h * np.arange(1, 2001)
    assert np.max(np.abs(psi - math.sqrt(2) * np.sin(PI * x))) < 1e-3


def test_fd_harmonic_ground_state():
    E0, _ = fd_ground_state(preset("harmonic", a=-8.0, b=8.0), 2000)
    assert abs(E0 - 0.5) < 1e-3


def test_fd_box_second_level():
    E1, _ = fd_eigenpair(preset("box"), 2000, index=1)
    assert abs(E1 - 2 * PI**2) < 1e-2


def test_fd_grid_too_small():
    with pytest.raises(ValueError):
        fd_ground_state(preset("box"), 5)


def test_fd_matches_dense_diagonalization():
    # independent check of the tridiagonal route with a dense eigensolver
    p = preset("harmonic", a=-6.0, b=6.0)
    N = 200
    h = 12 / (N + 1)
    x = -6 + h * np.arange(1, N + 1)
    H = np.diag(1 / h**2 + 0.5 * x**2) + np.diag(np.full(N - 1, -0.5 / h**2), 1) + np.diag(
        np.full(N - 1, -0.5 / h**2), -1
    )
    dense = np.linalg.eigvalsh(H)
    for k in range(3):
        assert fd_eigenpair(p, N, k)[0] == pytest.approx(dense[k], rel=1e-10)


# properties ----------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.floats(0.5, 3.0))
def test_exact_eigenpairs_have_zero_residual(n, amp):
    psi = normalized(Unary("sin", Binary("*", Const(n * PI), X)), amp)
    xs = collocation_points(0, 1, 100)
    assert np.max(np.abs(residual(psi, preset("box"), (n * PI) ** 2 / 2, xs))) <= 1e-10 * n * n


@pytest.mark.parametrize("n", [1, 2, 3])
def test_rayleigh_of_exact_eigenfunction(n):
    psi = Unary("sin", Binary("*", Const(n * PI), X))
    assert rayleigh_energy(psi, preset("box")) == pytest.approx((n * PI) ** 2 / 2, abs=1e-6 * n**4)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["x", "sin(3*x)", "log(x-2)", "1/(x-x)", "sqrt(0-x)", "exp(x)*x", "BRF1(x)"]))
def test_penalty_totalization(text):
    rep = fitness(parse_expression(text), preset("box"))
    assert isinstance(rep, FitnessReport)
    assert (not rep.valid) == (rep.total == 1e10)
    if rep.valid:
        assert rep.total == rep.residual_sse + rep.norm_penalty + rep.boundary_penalty
    assert fitness(parse_expression(text), preset("box")) == rep
